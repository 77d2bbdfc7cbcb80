//! Energy functions, dissipative one-forms, and their defining identities.
//!
//! The kinetic part integrates each inductor law against its scalar
//! argument, `sum_a int_0^{sigma_a(q')} L_a(u) u du`; the potential part
//! integrates each capacitor law, `sum_alpha int_0^{s_alpha(q)} C_alpha(u) du`,
//! gauged so the potential vanishes at `q = 0`. Linear devices use the
//! closed forms; expression devices use adaptive Simpson quadrature.
//!
//! The defining identity ties the assembly to the energy:
//!
//! ```text
//! sum_j Q_j q'^j = sum_j [dE/dq^j q'^j + dE/dq'^j q''^j] + sum_j D_j q'^j
//! ```
//!
//! with `D = 0` for LC networks. When some resistor has `R(0) != 0` the
//! shifted storage adds the linear term `sum_G N^G_j R_G(0) q^j` and the
//! one-form subtracts `R_G(0)` from each resistor law, keeping the identity
//! and restoring dissipativity under the shifted sector condition.

use nalgebra::DVector;

use crate::birkhoffian::BirkhoffSystem;
use crate::error::{Error, Result};
use crate::netlist::{BranchKind, DeviceModel};

const QUAD_TOL: f64 = 1e-12;
const QUAD_MAX_DEPTH: usize = 40;

/// Energy of the network in chart coordinates.
#[derive(Debug, Clone)]
pub struct EnergyFunction {
    inductors: Vec<EnergyTerm>,
    capacitors: Vec<EnergyTerm>,
    /// Coefficients of the linear shift `sum_G N^G_j R_G(0) q^j`; zero
    /// unless the shifted storage was requested.
    pub linear_shift: DVector<f64>,
    m: usize,
}

#[derive(Debug, Clone)]
struct EnergyTerm {
    n_row: DVector<f64>,
    k_comp: f64,
    kind: BranchKind,
    model: DeviceModel,
    /// Gauge constant subtracted so the term vanishes at q = 0.
    gauge: f64,
}

impl EnergyTerm {
    fn scalar_arg(&self, state: &DVector<f64>) -> f64 {
        let base = self.n_row.dot(state);
        if self.kind == BranchKind::Capacitor {
            base + self.k_comp
        } else {
            base
        }
    }

    /// Antiderivative of the device law from 0 to `upper`.
    fn primitive(&self, upper: f64) -> Result<f64> {
        match (&self.model, self.kind) {
            (DeviceModel::LinearConst(c), BranchKind::Inductor) => Ok(0.5 * c * upper * upper),
            (DeviceModel::LinearConst(c), BranchKind::Capacitor) => {
                Ok(0.5 * upper * upper / c)
            }
            (DeviceModel::Expr(t), BranchKind::Inductor) => {
                adaptive_simpson(&|u| Ok(t.eval(u)?.0 * u), 0.0, upper)
            }
            (DeviceModel::Expr(t), BranchKind::Capacitor) => {
                adaptive_simpson(&|u| Ok(t.eval(u)?.0), 0.0, upper)
            }
            (_, BranchKind::Resistor) => Err(Error::Internal(
                "resistors carry no stored energy".to_string(),
            )),
        }
    }
}

impl EnergyFunction {
    pub fn dim(&self) -> usize {
        self.m
    }

    /// Kinetic part, a function of the velocities only.
    pub fn kinetic(&self, qdot: &DVector<f64>) -> Result<f64> {
        let mut sum = 0.0;
        for t in &self.inductors {
            sum += t.primitive(t.scalar_arg(qdot))?;
        }
        Ok(sum)
    }

    /// Potential part, gauged to zero at the origin.
    pub fn potential(&self, q: &DVector<f64>) -> Result<f64> {
        let mut sum = 0.0;
        for t in &self.capacitors {
            sum += t.primitive(t.scalar_arg(q))? - t.gauge;
        }
        Ok(sum)
    }

    pub fn value(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<f64> {
        Ok(self.kinetic(qdot)? + self.potential(q)? + self.linear_shift.dot(q))
    }

    /// Analytic gradient in `q`: `sum_alpha C_alpha(s_alpha(q)) N^alpha + shift`.
    pub fn grad_q(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        let mut g = self.linear_shift.clone();
        for t in &self.capacitors {
            let (val, _) = t.model.law(BranchKind::Capacitor, t.scalar_arg(q))?;
            g += val * &t.n_row;
        }
        Ok(g)
    }

    /// Analytic gradient in `q'`: `sum_a L_a(sigma_a) sigma_a N^a`.
    pub fn grad_qdot(&self, qdot: &DVector<f64>) -> Result<DVector<f64>> {
        let mut g = DVector::zeros(self.m);
        for t in &self.inductors {
            let sigma = t.scalar_arg(qdot);
            let (val, _) = t.model.law(BranchKind::Inductor, sigma)?;
            g += val * sigma * &t.n_row;
        }
        Ok(g)
    }
}

/// Dissipative one-form `D_j(q') = sum_G N^G_j [R_G(sigma_G(q')) - r0_G]`,
/// with `r0_G = R_G(0)` in the shifted variant and zero otherwise.
#[derive(Debug, Clone)]
pub struct DissipativeForm {
    resistors: Vec<(DVector<f64>, DeviceModel, f64)>,
    pub shifted: bool,
    m: usize,
}

impl DissipativeForm {
    pub fn components(&self, qdot: &DVector<f64>) -> Result<DVector<f64>> {
        let mut d = DVector::zeros(self.m);
        for (n_row, model, r0) in &self.resistors {
            let sigma = n_row.dot(qdot);
            let (val, _) = model.law(BranchKind::Resistor, sigma)?;
            d += (val - r0) * n_row;
        }
        Ok(d)
    }

    /// Dissipated power `sum_j D_j q'^j`.
    pub fn power(&self, qdot: &DVector<f64>) -> Result<f64> {
        Ok(self.components(qdot)?.dot(qdot))
    }
}

/// True when some resistor law is nonzero at rest, which calls for the
/// shifted storage function.
pub fn needs_shift(sys: &BirkhoffSystem) -> Result<bool> {
    for d in sys.resistor_rows() {
        if d.law(0.0)?.0 != 0.0 {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Build the energy function and, for RLC networks, the dissipative
/// one-form. `shifted` selects the storage variant for `R(0) != 0`.
pub fn build_energy(
    sys: &BirkhoffSystem,
    shifted: bool,
) -> Result<(EnergyFunction, Option<DissipativeForm>)> {
    let m = sys.dim();
    let mut inductors = Vec::new();
    for d in sys.inductor_rows() {
        inductors.push(EnergyTerm {
            n_row: d.n_row.clone(),
            k_comp: d.k_comp,
            kind: BranchKind::Inductor,
            model: d.model.clone(),
            gauge: 0.0,
        });
    }
    let mut capacitors = Vec::new();
    for d in sys.capacitor_rows() {
        let mut term = EnergyTerm {
            n_row: d.n_row.clone(),
            k_comp: d.k_comp,
            kind: BranchKind::Capacitor,
            model: d.model.clone(),
            gauge: 0.0,
        };
        term.gauge = term.primitive(d.k_comp)?;
        capacitors.push(term);
    }
    let mut linear_shift = DVector::zeros(m);
    let mut resistors = Vec::new();
    for d in sys.resistor_rows() {
        let r0 = d.law(0.0)?.0;
        if shifted {
            linear_shift += r0 * &d.n_row;
            resistors.push((d.n_row.clone(), d.model.clone(), r0));
        } else {
            resistors.push((d.n_row.clone(), d.model.clone(), 0.0));
        }
    }
    let energy = EnergyFunction { inductors, capacitors, linear_shift, m };
    let form = if sys.case_tag.is_dissipative() {
        Some(DissipativeForm { resistors, shifted, m })
    } else {
        None
    };
    Ok((energy, form))
}

/// Time derivative of the energy along the Birkhoffian vector field.
///
/// Zero for conservative networks; `-sum_j D_j q'^j` for dissipative ones.
pub fn energy_rate(
    sys: &BirkhoffSystem,
    e: &EnergyFunction,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
) -> Result<f64> {
    let qddot = sys.acceleration(q, qdot)?;
    Ok(e.grad_q(q)?.dot(qdot) + e.grad_qdot(qdot)?.dot(&qddot))
}

/// Residuals of the defining identity at a batch of sample states.
#[derive(Debug, Clone)]
pub struct IdentityReport {
    /// Worst identity residual with analytic energy gradients.
    pub max_residual_analytic: f64,
    /// Worst identity residual with finite-difference gradients.
    pub max_residual_fd: f64,
    /// Worst mismatch between analytic and finite-difference gradients.
    pub max_grad_mismatch: f64,
    /// All analytic residuals within `1e-8 * scale`.
    pub ok: bool,
    pub samples: usize,
}

/// Check the conservativeness (D absent) or dissipativeness identity at the
/// given `(q, q', q'')` samples. Energy partials enter both analytically and
/// by central differences of step `1e-6`.
pub fn verify_identity(
    sys: &BirkhoffSystem,
    e: &EnergyFunction,
    d: Option<&DissipativeForm>,
    samples: &[(DVector<f64>, DVector<f64>, DVector<f64>)],
) -> Result<IdentityReport> {
    let h = 1e-6;
    let mut report = IdentityReport {
        max_residual_analytic: 0.0,
        max_residual_fd: 0.0,
        max_grad_mismatch: 0.0,
        ok: true,
        samples: samples.len(),
    };
    for (q, qdot, qddot) in samples {
        let lhs = sys.components(q, qdot, qddot)?.dot(qdot);
        let d_power = match d {
            Some(form) => form.power(qdot)?,
            None => 0.0,
        };
        let gq = e.grad_q(q)?;
        let gqd = e.grad_qdot(qdot)?;
        let rhs = gq.dot(qdot) + gqd.dot(qddot) + d_power;
        let scale = 1.0 + q.amax().max(qdot.amax()).max(qddot.amax());
        let res = (lhs - rhs).abs();
        report.max_residual_analytic = report.max_residual_analytic.max(res);
        if res > 1e-8 * scale {
            report.ok = false;
        }

        let mut gq_fd = DVector::zeros(e.m);
        let mut gqd_fd = DVector::zeros(e.m);
        for i in 0..e.m {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[i] += h;
            qm[i] -= h;
            gq_fd[i] = (e.value(&qp, qdot)? - e.value(&qm, qdot)?) / (2.0 * h);
            let mut vp = qdot.clone();
            let mut vm = qdot.clone();
            vp[i] += h;
            vm[i] -= h;
            gqd_fd[i] = (e.value(q, &vp)? - e.value(q, &vm)?) / (2.0 * h);
        }
        let rhs_fd = gq_fd.dot(qdot) + gqd_fd.dot(qddot) + d_power;
        report.max_residual_fd = report.max_residual_fd.max((lhs - rhs_fd).abs());
        let mismatch = (&gq_fd - &gq)
            .amax()
            .max((&gqd_fd - &gqd).amax())
            / (1.0 + gq.amax().max(gqd.amax()));
        report.max_grad_mismatch = report.max_grad_mismatch.max(mismatch);
    }
    Ok(report)
}

/// Adaptive Simpson quadrature with absolute tolerance `1e-12` and depth
/// cap 40. Handles reversed limits by sign.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return Ok(-adaptive_simpson(f, b, a)?);
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let mid = 0.5 * (a + b);
    let fm = f(mid)?;
    let whole = simpson(a, b, fa, fm, fb);
    simpson_recurse(f, a, b, fa, fm, fb, whole, QUAD_TOL, QUAD_MAX_DEPTH)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse(
    f: &dyn Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    let mid = 0.5 * (a + b);
    let lm = 0.5 * (a + mid);
    let rm = 0.5 * (mid + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = simpson(a, mid, fa, flm, fm);
    let right = simpson(mid, b, fm, frm, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Quadrature { a, b, depth: QUAD_MAX_DEPTH });
    }
    let half_tol = 0.5 * tol;
    Ok(simpson_recurse(f, a, mid, fa, flm, fm, left, half_tol, depth - 1)?
        + simpson_recurse(f, mid, b, fm, frm, fb, right, half_tol, depth - 1)?)
}
