//! Central finite-difference gradient checking.

use super::{Graph, ParamStore, Result};

pub const STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-5;
pub const ABS_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub checked: usize,
    pub max_rel_error: f64,
    pub mismatches: Vec<Mismatch>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

pub fn agrees(analytic: f64, numeric: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= ABS_TOL || diff / analytic.abs().max(numeric.abs()) <= REL_TOL
}

/// Compares reverse-mode gradients of the scalar built by `build` against
/// central differences for every scalar of every parameter in `store`.
pub fn check<F>(store: &mut ParamStore, build: F) -> Result<Report>
where
    F: Fn(&mut Graph) -> Result<super::NodeId>,
{
    let analytic = {
        let mut g = Graph::new(store);
        let root = build(&mut g)?;
        g.backward(root)?
    };
    let eval = |s: &ParamStore| -> Result<f64> {
        let mut g = Graph::new(s);
        let root = build(&mut g)?;
        Ok(g.value(root).data()[0])
    };

    let mut report = Report::default();
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        for index in 0..store.get(id).len() {
            let orig = store.get(id).data()[index];
            store.get_mut(id).data_mut()[index] = orig + STEP;
            let up = eval(store)?;
            store.get_mut(id).data_mut()[index] = orig - STEP;
            let down = eval(store)?;
            store.get_mut(id).data_mut()[index] = orig;

            let numeric = (up - down) / (2.0 * STEP);
            let a = analytic.get(id).map_or(0.0, |t| t.data()[index]);
            report.checked += 1;
            let scale = a.abs().max(numeric.abs());
            if scale > 0.0 {
                report.max_rel_error = report.max_rel_error.max((a - numeric).abs() / scale);
            }
            if !agrees(a, numeric) {
                report.mismatches.push(Mismatch {
                    param: store.param(id).name.clone(),
                    index,
                    analytic: a,
                    numeric,
                });
            }
        }
    }
    Ok(report)
}
