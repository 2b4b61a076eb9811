//! Checks shared by the fuzz targets and the corpus replay test.

use kamnd::hamiltonian::parse_expr;
use kamnd::report::{parse_list, parse_region, resolve, Settings};
use kamnd::{HamiltonianModel, Point};

const MAX_INPUT: usize = 64 * 1024;

fn text(data: &[u8]) -> Option<&str> {
    if data.len() > MAX_INPUT {
        return None;
    }
    std::str::from_utf8(data).ok()
}

/// Printing a parsed expression gives text that parses back to the same
/// printed form.
pub fn check_parse_expr(data: &[u8]) {
    let Some(s) = text(data) else { return };
    if let Ok(e) = parse_expr(s, 4) {
        let printed = e.to_string();
        let again = parse_expr(&printed, 4).unwrap_or_else(|err| panic!("{printed:?} does not reparse: {err}"));
        assert_eq!(again.to_string(), printed);
    }
}

/// Accepted model documents survive a serialize/parse round trip.
pub fn check_model_json(data: &[u8]) {
    let Some(s) = text(data) else { return };
    if let Ok(m) = HamiltonianModel::from_json_str(s) {
        let json = m.to_json();
        let back = HamiltonianModel::from_json_str(&json).unwrap_or_else(|e| panic!("{json}: {e}"));
        assert_eq!(back.to_json(), json);
    }
}

/// Region and list arguments: the first byte picks the dimension.
pub fn check_region_arg(data: &[u8]) {
    let Some((&first, rest)) = data.split_first() else { return };
    let Some(s) = text(rest) else { return };
    let dim = 1 + (first as usize % 8);
    if let Ok(r) = parse_region(s, dim) {
        assert_eq!(r.dim(), dim);
        for a in 0..dim {
            assert!(r.lo(a) <= r.hi(a) && r.lo(a).is_finite() && r.hi(a).is_finite());
        }
    }
    if let Ok(v) = parse_list(s) {
        assert!(v.iter().all(|x| x.is_finite()));
    }
}

/// Config files either fail to parse or resolve without panicking, and a
/// resolved region lies in the model domain.
pub fn check_config_toml(data: &[u8]) {
    let Some(s) = text(data) else { return };
    let Ok(settings) = Settings::from_toml_str(s) else { return };
    // keep the fuzzer off the filesystem
    if settings.model_json.is_some() {
        return;
    }
    if let Ok(cfg) = resolve(settings, None, None) {
        if let (Some(src), Some(region)) = (&cfg.model, &cfg.region) {
            if let Ok(m) = src.load() {
                assert!(region.is_subset_of(&m.domain), "{region} not in {}", m.domain);
            }
        }
    }
}

/// Jets of arbitrary expressions: the Hessian is exactly symmetric.
pub fn check_eval_jet(data: &[u8]) {
    if data.len() < 24 {
        return;
    }
    let (coords, rest) = data.split_at(24);
    let Some(s) = text(rest) else { return };
    let Ok(m) = HamiltonianModel::parse(s, 3) else { return };
    let x: Vec<f64> = coords
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if x.iter().any(|v| !v.is_finite()) {
        return;
    }
    if let Ok(j) = m.eval_jet2(&Point::new(x)) {
        assert_eq!(j.hess, j.hess.transpose());
        assert_eq!(j.grad.len(), 3);
    }
}
