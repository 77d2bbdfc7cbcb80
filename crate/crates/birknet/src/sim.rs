//! Fixed-step integration of the Birkhoffian vector field with energy
//! monitors.
//!
//! The second-order system is integrated as `(q, q')' = (q', q''(q, q'))`
//! with the classical fourth-order one-step method at a fixed step, so a
//! given netlist and step always produce the same samples. Energy and its
//! time derivative are recorded at every sample; `verify_monotone` then
//! checks conservation (LC) or monotone decay plus power balance (RLC).

use nalgebra::DVector;
use serde::Serialize;

use crate::birkhoffian::{BirkhoffSystem, CaseTag};
use crate::energy::{DissipativeForm, EnergyFunction};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<(DVector<f64>, DVector<f64>)>,
    pub energies: Vec<f64>,
    pub rates: Vec<f64>,
    /// Set when the run stopped early on a singular mass matrix.
    pub truncated: Option<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> Option<&(DVector<f64>, DVector<f64>)> {
        self.states.last()
    }

    /// CSV rows `t,q1..qm,qd1..qdm,E,dEdt` at full double precision.
    pub fn to_csv(&self) -> String {
        let m = self.states.first().map_or(0, |(q, _)| q.len());
        let mut out = String::from("t");
        for i in 1..=m {
            out.push_str(&format!(",q{i}"));
        }
        for i in 1..=m {
            out.push_str(&format!(",qd{i}"));
        }
        out.push_str(",E,dEdt\n");
        for i in 0..self.len() {
            out.push_str(&format!("{:.16e}", self.times[i]));
            let (q, qd) = &self.states[i];
            for v in q.iter().chain(qd.iter()) {
                out.push_str(&format!(",{v:.16e}"));
            }
            out.push_str(&format!(",{:.16e},{:.16e}\n", self.energies[i], self.rates[i]));
        }
        out
    }
}

/// Integrate from `(q0, qdot0)` to `t_end` with step `dt`.
///
/// A singular mass matrix mid-run truncates the trajectory and sets the
/// flag; state blow-up beyond 1e12 aborts with an error.
pub fn integrate(
    sys: &BirkhoffSystem,
    energy: &EnergyFunction,
    q0: &DVector<f64>,
    qdot0: &DVector<f64>,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    if dt <= 0.0 {
        return Err(Error::Internal("step size must be positive".to_string()));
    }
    if t_end < 0.0 {
        return Err(Error::Internal("horizon must be nonnegative".to_string()));
    }
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        energies: Vec::new(),
        rates: Vec::new(),
        truncated: None,
    };
    let mut q = q0.clone();
    let mut qdot = qdot0.clone();

    let steps = if t_end == 0.0 {
        0
    } else {
        let ratio = t_end / dt;
        if (ratio - ratio.round()).abs() < 1e-9 {
            ratio.round() as usize
        } else {
            ratio.ceil() as usize
        }
    };

    let record = |traj: &mut Trajectory, t: f64, q: &DVector<f64>, qdot: &DVector<f64>| -> Result<()> {
        let qddot = sys.acceleration(q, qdot)?;
        let e = energy.value(q, qdot)?;
        let rate = energy.grad_q(q)?.dot(qdot) + energy.grad_qdot(qdot)?.dot(&qddot);
        traj.times.push(t);
        traj.states.push((q.clone(), qdot.clone()));
        traj.energies.push(e);
        traj.rates.push(rate);
        Ok(())
    };

    match record(&mut traj, 0.0, &q, &qdot) {
        Ok(()) => {}
        Err(Error::SingularMass { .. }) => {
            traj.truncated = Some("singular mass matrix at t = 0".to_string());
            return Ok(traj);
        }
        Err(e) => return Err(e),
    }

    for step in 0..steps {
        let t = step as f64 * dt;
        let h = if step + 1 == steps { t_end - t } else { dt };
        let next = rk4_step(sys, &q, &qdot, h);
        let (nq, nqdot) = match next {
            Ok(pair) => pair,
            Err(Error::SingularMass { .. }) => {
                traj.truncated = Some(format!("singular mass matrix near t = {t}"));
                return Ok(traj);
            }
            Err(e) => return Err(e),
        };
        q = nq;
        qdot = nqdot;
        let t_next = if step + 1 == steps { t_end } else { (step + 1) as f64 * dt };
        let norm = q.amax().max(qdot.amax());
        if norm > 1e12 {
            return Err(Error::BlowUp { t: t_next, norm });
        }
        match record(&mut traj, t_next, &q, &qdot) {
            Ok(()) => {}
            Err(Error::SingularMass { .. }) => {
                traj.truncated = Some(format!("singular mass matrix at t = {t_next}"));
                return Ok(traj);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(traj)
}

fn rk4_step(
    sys: &BirkhoffSystem,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    h: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let f = |q: &DVector<f64>, qdot: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>)> {
        Ok((qdot.clone(), sys.acceleration(q, qdot)?))
    };
    let (k1q, k1v) = f(q, qdot)?;
    let (k2q, k2v) = f(&(q + 0.5 * h * &k1q), &(qdot + 0.5 * h * &k1v))?;
    let (k3q, k3v) = f(&(q + 0.5 * h * &k2q), &(qdot + 0.5 * h * &k2v))?;
    let (k4q, k4v) = f(&(q + h * &k3q), &(qdot + h * &k3v))?;
    Ok((
        q + h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q),
        qdot + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    ))
}

/// Energy-monotonicity verdict over a trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct MonotoneReport {
    pub case: String,
    pub ok: bool,
    /// LC: worst deviation from the initial energy.
    pub max_drift: f64,
    /// RLC: worst mismatch between dE/dt and the dissipated power.
    pub max_power_mismatch: f64,
    pub first_violation: Option<Violation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub t: f64,
    pub detail: String,
}

/// Conservation check for LC runs; monotone decay plus pointwise power
/// balance for RLC runs.
pub fn verify_monotone(
    traj: &Trajectory,
    case: CaseTag,
    d: Option<&DissipativeForm>,
) -> Result<MonotoneReport> {
    let mut report = MonotoneReport {
        case: case.name().to_string(),
        ok: true,
        max_drift: 0.0,
        max_power_mismatch: 0.0,
        first_violation: None,
    };
    if traj.is_empty() {
        return Ok(report);
    }
    let e0 = traj.energies[0];
    if !case.is_dissipative() {
        for i in 0..traj.len() {
            let drift = (traj.energies[i] - e0).abs();
            report.max_drift = report.max_drift.max(drift);
            if drift > 1e-7 * (1.0 + e0.abs()) && report.first_violation.is_none() {
                report.ok = false;
                report.first_violation = Some(Violation {
                    t: traj.times[i],
                    detail: format!("energy drift {drift:e}"),
                });
            }
        }
        return Ok(report);
    }
    let d = d.ok_or_else(|| {
        Error::Internal("dissipative case requires the dissipative one-form".to_string())
    })?;
    for i in 0..traj.len() {
        if i + 1 < traj.len() && traj.energies[i + 1] > traj.energies[i] + 1e-9 {
            report.ok = false;
            if report.first_violation.is_none() {
                report.first_violation = Some(Violation {
                    t: traj.times[i + 1],
                    detail: format!(
                        "energy increased from {:e} to {:e}",
                        traj.energies[i],
                        traj.energies[i + 1]
                    ),
                });
            }
        }
        let (q, qdot) = &traj.states[i];
        let power = d.power(qdot)?;
        let mismatch = (traj.rates[i] + power).abs();
        report.max_power_mismatch = report.max_power_mismatch.max(mismatch);
        let scale = 1.0 + q.amax().max(qdot.amax()).max(traj.rates[i].abs());
        if mismatch > 1e-7 * scale {
            report.ok = false;
            if report.first_violation.is_none() {
                report.first_violation = Some(Violation {
                    t: traj.times[i],
                    detail: format!("power balance residual {mismatch:e}"),
                });
            }
        }
    }
    Ok(report)
}

/// Closest return of the trajectory to its initial state after it has left
/// a neighborhood of it: evidence of periodic motion around a center.
pub fn closest_return(traj: &Trajectory) -> Option<(f64, f64)> {
    if traj.len() < 3 {
        return None;
    }
    let (q0, qd0) = &traj.states[0];
    let dist = |i: usize| -> f64 {
        let (q, qd) = &traj.states[i];
        ((q - q0).norm_squared() + (qd - qd0).norm_squared()).sqrt()
    };
    let max_dist = (0..traj.len()).map(dist).fold(0.0, f64::max);
    if max_dist == 0.0 {
        // constant trajectory: it never leaves, report immediate return
        return Some((traj.times[traj.len() - 1], 0.0));
    }
    let departed = (0..traj.len()).find(|&i| dist(i) > 0.5 * max_dist)?;
    (departed..traj.len())
        .map(|i| (traj.times[i], dist(i)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Mean distance to the equilibrium over the last quarter of the run,
/// relative to the first quarter: evidence of convergence.
pub fn convergence_ratio(traj: &Trajectory, q_e: &DVector<f64>) -> Option<f64> {
    let n = traj.len();
    if n < 8 {
        return None;
    }
    let dist = |i: usize| -> f64 {
        let (q, qd) = &traj.states[i];
        ((q - q_e).norm_squared() + qd.norm_squared()).sqrt()
    };
    let quarter = n / 4;
    let head: f64 = (0..quarter).map(dist).sum::<f64>() / quarter as f64;
    let tail: f64 = (n - quarter..n).map(dist).sum::<f64>() / quarter as f64;
    if head == 0.0 {
        return None;
    }
    Some(tail / head)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspace::chart_with_initial_state;
    use crate::energy::{build_energy, needs_shift};
    use crate::graph::CircuitGraph;
    use crate::netlist::{parse_netlist, SIX_BRANCH_EXAMPLE};

    fn pipeline(
        text: &str,
        coords: Option<&[usize]>,
    ) -> (BirkhoffSystem, EnergyFunction, Option<DissipativeForm>, DVector<f64>, DVector<f64>) {
        let doc = parse_netlist(text).unwrap();
        let g = CircuitGraph::build(&doc).unwrap();
        let (cs, init) = chart_with_initial_state(&doc, &g, coords).unwrap();
        let sys = BirkhoffSystem::assemble(&cs, &doc).unwrap();
        let shifted = needs_shift(&sys).unwrap();
        let (e, d) = build_energy(&sys, shifted).unwrap();
        (sys, e, d, init.q0, init.qdot0)
    }

    const UNIT_LOOP: &str = ".nodes 2\nL1 1 2 1.0\nC1 2 1 1.0\n.ic C1 1.0\n";

    #[test]
    fn harmonic_oscillator_returns_after_one_period() {
        let (sys, e, _, q0, qd0) = pipeline(UNIT_LOOP, None);
        let traj = integrate(&sys, &e, &q0, &qd0, 2.0 * std::f64::consts::PI, 1e-3).unwrap();
        let (q, qd) = traj.last_state().unwrap();
        assert!((q[0] - 1.0).abs() < 1e-6);
        assert!(qd[0].abs() < 1e-6);
    }

    #[test]
    fn equilibrium_start_stays_put() {
        let (sys, e, _, _, _) = pipeline(SIX_BRANCH_EXAMPLE, Some(&[4, 5]));
        let q0 = DVector::zeros(2);
        let traj = integrate(&sys, &e, &q0, &q0.clone(), 1.0, 1e-2).unwrap();
        for (q, qd) in &traj.states {
            assert_eq!(q.amax(), 0.0);
            assert_eq!(qd.amax(), 0.0);
        }
    }

    #[test]
    fn lc_conservation_over_long_run() {
        let (sys, e, d, q0, qd0) = pipeline(UNIT_LOOP, None);
        let traj = integrate(&sys, &e, &q0, &qd0, 100.0, 1e-3).unwrap();
        let rep = verify_monotone(&traj, sys.case_tag, d.as_ref()).unwrap();
        assert!(rep.ok, "drift {}", rep.max_drift);
        assert!(rep.max_drift <= 1e-7);
    }

    #[test]
    fn rlc_decay_reaches_equilibrium() {
        let text = format!("{SIX_BRANCH_EXAMPLE}.ic C1 1.0\n");
        let (sys, e, d, q0, qd0) = pipeline(&text, Some(&[4, 5]));
        let traj = integrate(&sys, &e, &q0, &qd0, 200.0, 1e-2).unwrap();
        let rep = verify_monotone(&traj, sys.case_tag, d.as_ref()).unwrap();
        assert!(rep.ok, "violation: {:?}", rep.first_violation);
        let (q, qd) = traj.last_state().unwrap();
        assert!((q[0] + 1.0 / 3.0).abs() < 1e-4);
        assert!((q[1] - 1.0 / 3.0).abs() < 1e-4);
        assert!(qd.amax() < 1e-4);
        let q_e = DVector::from_vec(vec![-1.0 / 3.0, 1.0 / 3.0]);
        let ratio = convergence_ratio(&traj, &q_e).unwrap();
        assert!(ratio < 0.01, "ratio {ratio}");
    }

    #[test]
    fn zero_horizon_passes_trivially() {
        let (sys, e, d, q0, qd0) = pipeline(UNIT_LOOP, None);
        let traj = integrate(&sys, &e, &q0, &qd0, 0.0, 1e-3).unwrap();
        assert_eq!(traj.len(), 1);
        let rep = verify_monotone(&traj, sys.case_tag, d.as_ref()).unwrap();
        assert!(rep.ok);
    }

    #[test]
    fn fourth_order_convergence() {
        let (sys, e, _, q0, qd0) = pipeline(UNIT_LOOP, None);
        let t_end = 1.0;
        let reference = integrate(&sys, &e, &q0, &qd0, t_end, 1.0 / 1024.0).unwrap();
        let (rq, rqd) = reference.last_state().unwrap();
        let err_of = |dt: f64| -> f64 {
            let traj = integrate(&sys, &e, &q0, &qd0, t_end, dt).unwrap();
            let (q, qd) = traj.last_state().unwrap();
            ((q - rq).norm_squared() + (qd - rqd).norm_squared()).sqrt()
        };
        let e1 = err_of(1.0 / 64.0);
        let e2 = err_of(1.0 / 128.0);
        assert!(e1 / e2 >= 12.0, "e1={e1:e}, e2={e2:e}");
    }

    #[test]
    fn periodic_return_for_center() {
        let (sys, e, _, q0, qd0) = pipeline(UNIT_LOOP, None);
        let traj = integrate(&sys, &e, &q0, &qd0, 7.0, 1e-4).unwrap();
        let (t, dist) = closest_return(&traj).unwrap();
        assert!(dist < 1e-4, "closest return {dist:e} at t={t}");
        assert!((t - 2.0 * std::f64::consts::PI).abs() < 0.01);
    }

    #[test]
    fn blow_up_aborts() {
        // negative capacitance: exponential growth
        let (sys, e, _, _, _) = pipeline(".nodes 2\nL1 1 2 1.0\nC1 2 1 -0.01\n", None);
        let q0 = DVector::from_vec(vec![1.0]);
        let qd0 = DVector::zeros(1);
        let out = integrate(&sys, &e, &q0, &qd0, 10.0, 1e-2);
        assert!(matches!(out, Err(Error::BlowUp { .. })));
    }

    #[test]
    fn singular_mass_truncates() {
        // L(x) = 1 - x^2 loses invertibility at |sigma| = 1
        let (sys, e, _, _, _) = pipeline(
            ".nodes 2\nL1 1 2 expr: 1 - x^2\nC1 2 1 expr: 10*x\n.ic C1 2.0\n",
            None,
        );
        let q0 = DVector::from_vec(vec![2.0]);
        let qd0 = DVector::zeros(1);
        let traj = integrate(&sys, &e, &q0, &qd0, 10.0, 1e-2).unwrap();
        assert!(traj.truncated.is_some());
        assert!(traj.len() > 1);
    }

    #[test]
    fn csv_has_header_and_full_precision() {
        let (sys, e, _, q0, qd0) = pipeline(UNIT_LOOP, None);
        let traj = integrate(&sys, &e, &q0, &qd0, 0.01, 1e-2).unwrap();
        let csv = traj.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,q1,qd1,E,dEdt");
        let row = lines.next().unwrap();
        assert!(row.starts_with("0.0000000000000000e0,1.0000000000000000e0"));
    }
}
