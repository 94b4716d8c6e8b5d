//! wasm-bindgen exports for `www/index.html`. Every export returns JSON so
//! the page stays a thin renderer.

use degree_forge::degree::{brouwer_degree, Region};
use degree_forge::geometry::{pt, Mat2, Point2};
use degree_forge::maps::MapSpec;
use degree_forge::obstruction::monodromy_check;
use degree_forge::smoothing::det_convex_check;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn map_err(e: impl ToString) -> String {
    e.to_string()
}

pub fn degree_json(map: &str, radius: f64, x: f64, y: f64) -> Result<String, String> {
    let spec: MapSpec = map.parse().map_err(map_err)?;
    let f = spec.builtin().ok_or("PL map files are not available in the browser")?;
    let u = Region::disk(Point2::ORIGIN, radius, 512).map_err(map_err)?;
    let report = brouwer_degree(f.as_ref(), &u, pt(x, y)).map_err(map_err)?;
    let boundary: Vec<Point2> = u.boundary().sample_uniform(512).into_iter().map(|p| f.eval(p)).collect();
    Ok(json!({ "report": report, "boundary_image": boundary }).to_string())
}

/// Branch tracks of `z^2 + lambda z` around the default loop.
pub fn tracks_json(lambda: f64, steps: usize) -> Result<String, String> {
    let spec: MapSpec = format!("poly:0,0;{lambda},0;1,0").parse().map_err(map_err)?;
    let g = spec.builtin().expect("polynomials are built in");
    let r = monodromy_check(g.as_ref(), 0.1, steps).map_err(map_err)?;
    Ok(json!({
        "swapped": r.swapped,
        "decisive": r.decisive,
        "sup_error": r.sup_error.value,
        "critical_value": [-lambda * lambda / 4.0, 0.0],
        "y1": r.track.y1,
        "y2": r.track.y2,
    })
    .to_string())
}

pub fn convex_json(a: &[f64], b: &[f64], sweep: usize) -> Result<String, String> {
    let m = |v: &[f64]| match v {
        [p, q, r, s] => Ok(Mat2::new(*p, *q, *r, *s)),
        _ => Err(format!("expected 4 matrix entries, got {}", v.len())),
    };
    let verdict = det_convex_check(&m(a)?, &m(b)?, sweep);
    serde_json::to_string(&verdict).map_err(map_err)
}

#[wasm_bindgen]
pub fn degree(map: &str, radius: f64, x: f64, y: f64) -> Result<String, JsValue> {
    degree_json(map, radius, x, y).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn branch_tracks(lambda: f64, steps: usize) -> Result<String, JsValue> {
    tracks_json(lambda, steps).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn convex_check(a: &[f64], b: &[f64], sweep: usize) -> Result<String, JsValue> {
    convex_json(a, b, sweep).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_of_square_is_two() {
        let v: serde_json::Value = serde_json::from_str(&degree_json("square", 1.0, 0.2, 0.1).unwrap()).unwrap();
        assert_eq!(v["report"]["degree"], 2);
        assert_eq!(v["boundary_image"].as_array().unwrap().len(), 512);
        assert!(degree_json("nonsense", 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn tracks_swap_for_small_lambda() {
        let v: serde_json::Value = serde_json::from_str(&tracks_json(0.05, 256).unwrap()).unwrap();
        assert_eq!(v["swapped"], true);
        assert_eq!(v["y1"].as_array().unwrap().len(), 257);
    }

    #[test]
    fn convex_check_round_trip() {
        let s = convex_json(&[1.0, 0.0, 0.0, 1.0], &[1.0, 3.0, 0.0, 0.5], 99).unwrap();
        assert!(s.contains("PASS"), "{s}");
        assert!(convex_json(&[1.0], &[1.0, 0.0, 0.0, 1.0], 9).is_err());
    }
}
