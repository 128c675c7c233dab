//! Browser bindings for the mediation explorer, the seeding-probability grid
//! and the AST-diff check. Every export takes and returns JSON text.
//!
//! A workspace travels as
//! `{"project": {"manifest": {..}, "source": ".."}, "libs": [..]}`.

use serde::{Deserialize, Serialize};
use serde_json::json;
use wasm_bindgen::prelude::*;

use semconflict_core::corpus::depth_fixture;
use semconflict_core::detector::{scan, DetectorConfig};
use semconflict_core::lang::pretty;
use semconflict_core::resolver::{build_tree, mediate, Manifest, Package, Workspace};
use semconflict_core::testgen::seeding_probability;

#[derive(Serialize, Deserialize)]
pub struct PackageText {
    pub manifest: Manifest,
    pub source: String,
}

#[derive(Serialize, Deserialize)]
pub struct WorkspaceText {
    pub project: PackageText,
    #[serde(default)]
    pub libs: Vec<PackageText>,
}

impl WorkspaceText {
    fn of(ws: &Workspace) -> Self {
        let text = |p: &Package| PackageText {
            manifest: p.manifest.clone(),
            source: pretty(&p.unit),
        };
        WorkspaceText {
            project: text(&ws.project),
            libs: ws.archive.values().map(text).collect(),
        }
    }

    fn build(self) -> Result<Workspace, String> {
        let libs: Vec<(Manifest, &str)> = self.libs.iter().map(|p| (p.manifest.clone(), p.source.as_str())).collect();
        Workspace::from_sources((self.project.manifest, &self.project.source), &libs).map_err(|e| e.to_string())
    }
}

fn workspace(text: &str) -> Result<Workspace, String> {
    serde_json::from_str::<WorkspaceText>(text)
        .map_err(|e| format!("workspace json: {e}"))?
        .build()
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("value serializes")
}

/// Dependency tree plus the nearest-wins mediation trace and classpath.
pub fn mediation_json(ws: &str) -> Result<String, String> {
    let tree = build_tree(&workspace(ws)?).map_err(|e| e.to_string())?;
    let classpath = mediate(&tree);
    Ok(to_json(&json!({ "tree": tree, "edges": tree.edges(), "classpath": classpath })))
}

/// `values[d-1][t]` is the seeding probability at depth `d` after `t`
/// successful seedings.
pub fn seeding_grid_json(max_depth: usize, max_ts: u64) -> Result<String, String> {
    if max_depth == 0 {
        return Err("max_depth must be at least 1".into());
    }
    let values = (1..=max_depth)
        .map(|d| (0..=max_ts).map(|t| seeding_probability(d, t)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    Ok(to_json(&json!({ "max_depth": max_depth, "max_ts": max_ts, "values": values })))
}

/// Conflicting pairs with their isomerism verdict and unequal AST sites.
pub fn ast_diff_json(ws: &str, depth_limit: usize) -> Result<String, String> {
    let config = DetectorConfig {
        depth_limit,
        ..DetectorConfig::default()
    };
    let inv = scan(&workspace(ws)?, &config).map_err(|e| e.to_string())?;
    let pairs: Vec<_> = inv
        .pairs
        .iter()
        .map(|r| {
            json!({
                "shadowed": r.pair.shadowed.to_string(),
                "loaded": r.pair.loaded.to_string(),
                "isomerous": r.pair.isomerous,
                "diff_sites": r.pair.diff_sites,
            })
        })
        .collect();
    Ok(to_json(&json!({ "pairs": pairs, "diagnostics": inv.diagnostics })))
}

/// Sample workspace whose only difference sits `diff_depth` calls below the
/// shadowed entry point.
pub fn sample_workspace_json(diff_depth: usize) -> Result<String, String> {
    let ws = depth_fixture(diff_depth.max(2)).map_err(|e| e.to_string())?;
    Ok(serde_json::to_string_pretty(&WorkspaceText::of(&ws)).expect("workspace serializes"))
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn mediation(ws: &str) -> Result<String, JsValue> {
    js(mediation_json(ws))
}

#[wasm_bindgen]
pub fn seeding_grid(max_depth: usize, max_ts: u32) -> Result<String, JsValue> {
    js(seeding_grid_json(max_depth, max_ts as u64))
}

#[wasm_bindgen]
pub fn ast_diff(ws: &str, depth_limit: usize) -> Result<String, JsValue> {
    js(ast_diff_json(ws, depth_limit))
}

#[wasm_bindgen]
pub fn sample_workspace(diff_depth: usize) -> Result<String, JsValue> {
    js(sample_workspace_json(diff_depth))
}
