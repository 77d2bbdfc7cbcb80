//! Equilibrium search and Liapunov classification.
//!
//! Linear networks have a unique equilibrium solved exactly from the
//! stiffness system. Nonlinear networks are searched by damped Newton
//! iteration from a deterministic multi-start set: the origin, axis points
//! at +/-1 and +/-10, and 50 seeded pseudo-random points.
//!
//! Each equilibrium is then judged against the sufficient conditions of the
//! four network classes. Sign conditions on constants are decided exactly;
//! sector conditions on expression resistors are sampled on a symmetric
//! log-spaced grid and reported as `Sampled`, never `Holds`. A failed
//! condition set yields `Inconclusive`: the conditions are sufficient only,
//! so nothing is ever reported unstable.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::birkhoffian::{near_singular, BirkhoffSystem, CaseTag};
use crate::energy::EnergyFunction;
use crate::error::{Error, Result};
use crate::netlist::DeviceModel;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub q_e: DVector<f64>,
    /// Infinity norm of `Q(q_e, 0, 0)`.
    pub residual: f64,
    /// Newton seeds that converged to this point.
    pub basin_hint: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StabilityClass {
    StableCenter,
    LocallyStableCenter,
    AsymptoticallyStable,
    LocallyAsymptoticallyStable,
    Inconclusive,
}

impl StabilityClass {
    pub fn name(self) -> &'static str {
        match self {
            StabilityClass::StableCenter => "StableCenter",
            StabilityClass::LocallyStableCenter => "LocallyStableCenter",
            StabilityClass::AsymptoticallyStable => "AsymptoticallyStable",
            StabilityClass::LocallyAsymptoticallyStable => "LocallyAsymptoticallyStable",
            StabilityClass::Inconclusive => "Inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConditionStatus {
    /// Decided exactly.
    Holds,
    /// Violated (exactly or at a sampled point).
    Fails,
    /// Verified on the sampling grid only.
    Sampled,
}

impl ConditionStatus {
    pub fn passed(self) -> bool {
        matches!(self, ConditionStatus::Holds | ConditionStatus::Sampled)
    }
}

#[derive(Debug, Clone)]
pub struct StabilityVerdict {
    pub class: StabilityClass,
    pub conditions: BTreeMap<String, ConditionStatus>,
    /// Block-diagonal Hessian of the Liapunov candidate at `(q_e, 0)`,
    /// velocities first.
    pub hessian: DMatrix<f64>,
    pub hessian_min_eigenvalue: f64,
    pub notes: Vec<String>,
}

/// Find all equilibria. Linear cases solve the stiffness system exactly;
/// nonlinear cases run the damped multi-start Newton search with the given
/// random seed. Returns the equilibria sorted lexicographically plus
/// diagnostic notes.
pub fn find_equilibria(
    sys: &BirkhoffSystem,
    seed: u64,
) -> Result<(Vec<Equilibrium>, Vec<String>)> {
    let m = sys.dim();
    let mut notes = Vec::new();
    if sys.case_tag.is_linear() {
        let stiffness = sys.equilibrium_jacobian(&DVector::zeros(m))?;
        if near_singular(&stiffness) {
            return Err(Error::Degenerate(
                "stiffness matrix is singular; the equilibrium system has no unique solution"
                    .to_string(),
            ));
        }
        let rhs = -sys.const_term();
        let q_e = stiffness
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Degenerate("stiffness solve failed".to_string()))?;
        let residual = sys.equilibrium_residual(&q_e)?.amax();
        return Ok((
            vec![Equilibrium { q_e, residual, basin_hint: Vec::new() }],
            notes,
        ));
    }

    let mut seeds: Vec<DVector<f64>> = vec![DVector::zeros(m)];
    for i in 0..m {
        for mag in [1.0, 10.0] {
            for sign in [1.0, -1.0] {
                let mut s = DVector::zeros(m);
                s[i] = sign * mag;
                seeds.push(s);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..50 {
        seeds.push(DVector::from_fn(m, |_, _| rng.random_range(-10.0..10.0)));
    }

    let mut found: Vec<Equilibrium> = Vec::new();
    let mut converged_seeds = 0usize;
    for seed_point in &seeds {
        let Some(q) = newton(sys, seed_point) else {
            continue;
        };
        converged_seeds += 1;
        let residual = sys.equilibrium_residual(&q)?.amax();
        if residual > 1e-10 * (1.0 + q.amax()) {
            continue;
        }
        match found
            .iter_mut()
            .find(|e| (&e.q_e - &q).norm() <= 1e-8)
        {
            Some(e) => e.basin_hint.push(seed_point.clone()),
            None => found.push(Equilibrium {
                q_e: q,
                residual,
                basin_hint: vec![seed_point.clone()],
            }),
        }
    }
    if found.is_empty() {
        notes.push(format!(
            "Newton failed to locate an equilibrium from all {} seeds ({} converged, none acceptable)",
            seeds.len(),
            converged_seeds
        ));
    }
    found.sort_by(|a, b| {
        a.q_e
            .iter()
            .zip(b.q_e.iter())
            .find_map(|(x, y)| {
                let ord = x.total_cmp(y);
                (ord != std::cmp::Ordering::Equal).then_some(ord)
            })
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok((found, notes))
}

/// Damped Newton on the equilibrium residual with Armijo backtracking
/// (factor 0.5, at most 30 halvings, at most 100 iterations).
fn newton(sys: &BirkhoffSystem, start: &DVector<f64>) -> Option<DVector<f64>> {
    let mut q = start.clone();
    let mut f = sys.equilibrium_residual(&q).ok()?;
    for _ in 0..100 {
        if f.amax() <= 1e-12 * (1.0 + q.amax()) {
            return Some(q);
        }
        let jac = sys.equilibrium_jacobian(&q).ok()?;
        let delta = jac.lu().solve(&(-&f))?;
        let f_sq = f.norm_squared();
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=30 {
            let candidate = &q + lambda * &delta;
            if let Ok(fc) = sys.equilibrium_residual(&candidate) {
                if fc.norm_squared() <= (1.0 - 1e-4 * lambda) * f_sq {
                    q = candidate;
                    f = fc;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    (f.amax() <= 1e-12 * (1.0 + q.amax())).then_some(q)
}

/// Evaluate the sufficient conditions at an equilibrium point.
pub fn check_conditions(
    sys: &BirkhoffSystem,
    q_e: &DVector<f64>,
) -> Result<BTreeMap<String, ConditionStatus>> {
    let mut out = BTreeMap::new();

    // L_a > 0 for constants; L_a(0) > 0 for expression inductances
    let mut ind = ConditionStatus::Holds;
    for d in sys.inductor_rows() {
        if d.law(0.0)?.0 <= 0.0 {
            ind = ConditionStatus::Fails;
        }
    }
    out.insert("inductance_positive".to_string(), ind);

    // C_alpha > 0 for constants (slope 1/C > 0); C'_alpha(s_alpha(q_e)) > 0
    let mut cap = ConditionStatus::Holds;
    for d in sys.capacitor_rows() {
        if d.law(d.scalar_arg(q_e))?.1 <= 0.0 {
            cap = ConditionStatus::Fails;
        }
    }
    out.insert("capacitor_slope_positive".to_string(), cap);

    if !sys.case_tag.is_dissipative() {
        return Ok(out);
    }

    if sys.case_tag == CaseTag::LinRlc {
        let mut res = ConditionStatus::Holds;
        for d in sys.resistor_rows() {
            if let DeviceModel::LinearConst(r) = &d.model {
                if *r <= 0.0 {
                    res = ConditionStatus::Fails;
                }
            }
        }
        out.insert("resistance_positive".to_string(), res);
        return Ok(out);
    }

    // nonlinear RLC: R(0) = 0 plus the sector condition, or the shifted sector
    let mut all_zero_at_origin = ConditionStatus::Holds;
    let mut sector = ConditionStatus::Holds;
    let mut shifted_sector = ConditionStatus::Holds;
    for d in sys.resistor_rows() {
        let r0 = d.law(0.0)?.0;
        if r0 != 0.0 {
            all_zero_at_origin = ConditionStatus::Fails;
        }
        match &d.model {
            DeviceModel::LinearConst(r) => {
                // x * (R x) = R x^2: sign decided exactly
                if *r <= 0.0 {
                    sector = ConditionStatus::Fails;
                    shifted_sector = ConditionStatus::Fails;
                }
            }
            DeviceModel::Expr(_) => {
                let plain = sample_sector(d, 0.0)?;
                let shifted = sample_sector(d, r0)?;
                sector = combine_sampled(sector, plain);
                shifted_sector = combine_sampled(shifted_sector, shifted);
            }
        }
    }
    out.insert("resistor_zero_at_origin".to_string(), all_zero_at_origin);
    out.insert("resistor_sector".to_string(), sector);
    out.insert("resistor_shifted_sector".to_string(), shifted_sector);
    Ok(out)
}

/// Sample `x (R(x) - offset) > 0` on a symmetric log grid of 61 points per
/// sign in [1e-6, 1e3], plus the necessary witness `R'(0) >= 0`.
fn sample_sector(d: &crate::birkhoffian::DeviceRow, offset: f64) -> Result<ConditionStatus> {
    let (_, slope0) = d.law(0.0)?;
    if slope0 < 0.0 {
        return Ok(ConditionStatus::Fails);
    }
    for i in 0..=60 {
        let x = 10f64.powf(-6.0 + 9.0 * f64::from(i) / 60.0);
        for sign in [1.0, -1.0] {
            let xs = sign * x;
            match d.law(xs) {
                Ok((val, _)) => {
                    if xs * (val - offset) <= 0.0 {
                        return Ok(ConditionStatus::Fails);
                    }
                }
                Err(_) => return Ok(ConditionStatus::Fails),
            }
        }
    }
    Ok(ConditionStatus::Sampled)
}

fn combine_sampled(acc: ConditionStatus, next: ConditionStatus) -> ConditionStatus {
    match (acc, next) {
        (ConditionStatus::Fails, _) | (_, ConditionStatus::Fails) => ConditionStatus::Fails,
        _ => ConditionStatus::Sampled,
    }
}

/// Analytic block Hessian of the Liapunov candidate at `(q_e, 0)`:
/// velocity block `sum_a L_a(0) N^a N^a^T`, position block
/// `sum_alpha C'_alpha(s_alpha(q_e)) N^alpha N^alpha^T`. Cross-checked
/// against central finite differences of the energy.
pub fn liapunov_hessian(
    sys: &BirkhoffSystem,
    e: &EnergyFunction,
    q_e: &DVector<f64>,
) -> Result<(DMatrix<f64>, f64)> {
    let m = sys.dim();
    let mut h = DMatrix::<f64>::zeros(2 * m, 2 * m);
    for d in sys.inductor_rows() {
        let (l0, _) = d.law(0.0)?;
        for i in 0..m {
            for j in 0..m {
                h[(i, j)] += l0 * d.n_row[i] * d.n_row[j];
            }
        }
    }
    for d in sys.capacitor_rows() {
        let (_, slope) = d.law(d.scalar_arg(q_e))?;
        for i in 0..m {
            for j in 0..m {
                h[(m + i, m + j)] += slope * d.n_row[i] * d.n_row[j];
            }
        }
    }

    // finite-difference cross-check of the analytic blocks
    let step = 1e-3;
    let value = |z: &DVector<f64>| -> Result<f64> {
        let qdot = z.rows(0, m).into_owned();
        let q = q_e + z.rows(m, m);
        e.value(&q, &qdot)
    };
    for i in 0..2 * m {
        for j in i..2 * m {
            let mut zpp = DVector::zeros(2 * m);
            zpp[i] += step;
            zpp[j] += step;
            let mut zpm = DVector::zeros(2 * m);
            zpm[i] += step;
            zpm[j] -= step;
            let mut zmp = DVector::zeros(2 * m);
            zmp[i] -= step;
            zmp[j] += step;
            let mut zmm = DVector::zeros(2 * m);
            zmm[i] -= step;
            zmm[j] -= step;
            let fd: f64 = (value(&zpp)? - value(&zpm)? - value(&zmp)? + value(&zmm)?)
                / (4.0 * step * step);
            let analytic = h[(i, j)];
            if (fd - analytic).abs() > 1e-5 * (1.0 + analytic.abs().max(fd.abs())) {
                return Err(Error::Internal(format!(
                    "Hessian cross-check failed at ({i}, {j}): analytic {analytic}, finite difference {fd}"
                )));
            }
        }
    }

    let min_eig = h
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok((h, min_eig))
}

/// Positive definiteness by LDL^T pivots above `1e-12 * trace / dim`.
pub fn is_positive_definite(h: &DMatrix<f64>) -> bool {
    let n = h.nrows();
    let tol = 1e-12 * h.trace() / n as f64;
    let mut l = DMatrix::<f64>::identity(n, n);
    let mut d = vec![0.0f64; n];
    for j in 0..n {
        let mut dj = h[(j, j)];
        for k in 0..j {
            dj -= l[(j, k)] * l[(j, k)] * d[k];
        }
        if dj <= tol {
            return false;
        }
        d[j] = dj;
        for i in j + 1..n {
            let mut v = h[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)] * d[k];
            }
            l[(i, j)] = v / dj;
        }
    }
    true
}

/// Apply the decision table of the four network classes.
pub fn classify(
    case: CaseTag,
    conditions: &BTreeMap<String, ConditionStatus>,
    hessian_pd: bool,
    shifted_energy: bool,
) -> StabilityClass {
    let get = |name: &str| conditions.get(name).copied().unwrap_or(ConditionStatus::Fails);
    let base = get("inductance_positive") == ConditionStatus::Holds
        && get("capacitor_slope_positive") == ConditionStatus::Holds;
    match case {
        CaseTag::LinLc if base => StabilityClass::StableCenter,
        CaseTag::NonlinLc if base && hessian_pd => StabilityClass::LocallyStableCenter,
        CaseTag::LinRlc if base && get("resistance_positive") == ConditionStatus::Holds => {
            StabilityClass::AsymptoticallyStable
        }
        CaseTag::NonlinRlc if base && hessian_pd => {
            let origin_route = get("resistor_zero_at_origin") == ConditionStatus::Holds
                && get("resistor_sector").passed();
            let shifted_route = shifted_energy && get("resistor_shifted_sector").passed();
            if origin_route || shifted_route {
                StabilityClass::LocallyAsymptoticallyStable
            } else {
                StabilityClass::Inconclusive
            }
        }
        _ => StabilityClass::Inconclusive,
    }
}

/// Full per-equilibrium analysis: conditions, Hessian, classification.
pub fn analyze_equilibrium(
    sys: &BirkhoffSystem,
    e: &EnergyFunction,
    q_e: &DVector<f64>,
    shifted_energy: bool,
) -> Result<StabilityVerdict> {
    let conditions = check_conditions(sys, q_e)?;
    let (hessian, min_eig) = liapunov_hessian(sys, e, q_e)?;
    let pd = is_positive_definite(&hessian);
    let mut conditions = conditions;
    conditions.insert(
        "hessian_positive_definite".to_string(),
        if pd { ConditionStatus::Holds } else { ConditionStatus::Fails },
    );
    let class = classify(sys.case_tag, &conditions, pd, shifted_energy);
    let mut notes = Vec::new();
    if sys.case_tag == CaseTag::NonlinRlc {
        if shifted_energy {
            let offenders: Vec<&str> = sys
                .resistor_rows()
                .iter()
                .filter(|d| d.law(0.0).map(|(v, _)| v != 0.0).unwrap_or(false))
                .map(|d| d.name.as_str())
                .collect();
            notes.push(format!(
                "R(0) != 0 on [{}]: classification uses the shifted storage function",
                offenders.join(", ")
            ));
        }
        if conditions
            .get("resistor_sector")
            .is_some_and(|s| *s == ConditionStatus::Sampled)
            || conditions
                .get("resistor_shifted_sector")
                .is_some_and(|s| *s == ConditionStatus::Sampled)
        {
            notes.push(
                "sector conditions verified by sampling on a log grid, not proved".to_string(),
            );
        }
    }
    Ok(StabilityVerdict {
        class,
        conditions,
        hessian,
        hessian_min_eigenvalue: min_eig,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspace::chart_with_initial_state;
    use crate::energy::{build_energy, needs_shift};
    use crate::graph::CircuitGraph;
    use crate::netlist::{parse_netlist, SIX_BRANCH_EXAMPLE};

    fn pipeline(text: &str, coords: Option<&[usize]>) -> (BirkhoffSystem, EnergyFunction, bool) {
        let doc = parse_netlist(text).unwrap();
        let g = CircuitGraph::build(&doc).unwrap();
        let (cs, _) = chart_with_initial_state(&doc, &g, coords).unwrap();
        let sys = BirkhoffSystem::assemble(&cs, &doc).unwrap();
        let shifted = needs_shift(&sys).unwrap();
        let (e, _) = build_energy(&sys, shifted).unwrap();
        (sys, e, shifted)
    }

    #[test]
    fn homogeneous_linear_equilibrium_is_origin() {
        let (sys, _, _) = pipeline(SIX_BRANCH_EXAMPLE, Some(&[4, 5]));
        let (eqs, _) = find_equilibria(&sys, DEFAULT_SEED).unwrap();
        assert_eq!(eqs.len(), 1);
        assert_eq!(eqs[0].q_e.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn reference_equilibrium_with_unit_offset() {
        // q1(0) - q2(0) + q3(0) = 1 gives 2q1 - q2 + 1 = 0, -q1 + 2q2 - 1 = 0
        let text = format!("{SIX_BRANCH_EXAMPLE}.ic C1 1.0\n");
        let (sys, _, _) = pipeline(&text, Some(&[4, 5]));
        let (eqs, _) = find_equilibria(&sys, DEFAULT_SEED).unwrap();
        assert_eq!(eqs.len(), 1);
        assert!((eqs[0].q_e[0] + 1.0 / 3.0).abs() < 1e-12);
        assert!((eqs[0].q_e[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!(eqs[0].residual <= 1e-10 * (1.0 + 1.0 / 3.0));
    }

    #[test]
    fn cubic_capacitor_has_three_equilibria() {
        let (sys, _, _) = pipeline(".nodes 2\nL1 1 2 1.0\nC1 2 1 expr: x^3 - x\n", None);
        let (eqs, _) = find_equilibria(&sys, DEFAULT_SEED).unwrap();
        assert_eq!(eqs.len(), 3);
        let roots: Vec<f64> = eqs.iter().map(|e| e.q_e[0]).collect();
        assert!((roots[0] + 1.0).abs() < 1e-9);
        assert!(roots[1].abs() < 1e-9);
        assert!((roots[2] - 1.0).abs() < 1e-9);
        // every equilibrium collected at least one seed
        assert!(eqs.iter().all(|e| !e.basin_hint.is_empty()));
    }

    #[test]
    fn conditions_for_sector_resistors() {
        // R(x) = x^3: sector sampled-true, R(0) = 0
        let text = "\
.nodes 5
.ref 5
R1 1 2 expr: x^3
L1 4 5 1.0
L2 2 3 1.0
C1 2 4 1.0
C2 5 1 1.0
C3 3 4 1.0
";
        let (sys, _, _) = pipeline(text, Some(&[4, 5]));
        let conds = check_conditions(&sys, &DVector::zeros(2)).unwrap();
        assert_eq!(conds["resistor_zero_at_origin"], ConditionStatus::Holds);
        assert_eq!(conds["resistor_sector"], ConditionStatus::Sampled);
    }

    #[test]
    fn offset_resistor_uses_shifted_sector() {
        // R(x) = 1 + x: R(0) = 1 but x(R(x) - R(0)) = x^2 > 0
        let text = "\
.nodes 5
.ref 5
R1 1 2 expr: 1 + x
L1 4 5 1.0
L2 2 3 1.0
C1 2 4 1.0
C2 5 1 1.0
C3 3 4 1.0
";
        let (sys, e, shifted) = pipeline(text, Some(&[4, 5]));
        assert!(shifted);
        let (eqs, _) = find_equilibria(&sys, DEFAULT_SEED).unwrap();
        assert_eq!(eqs.len(), 1);
        let verdict = analyze_equilibrium(&sys, &e, &eqs[0].q_e, shifted).unwrap();
        assert_eq!(verdict.conditions["resistor_zero_at_origin"], ConditionStatus::Fails);
        assert_eq!(verdict.conditions["resistor_shifted_sector"], ConditionStatus::Sampled);
        assert_eq!(verdict.class, StabilityClass::LocallyAsymptoticallyStable);
    }

    #[test]
    fn negative_resistor_fails_sector() {
        let text = "\
.nodes 5
.ref 5
R1 1 2 expr: -x
L1 4 5 1.0
L2 2 3 1.0
C1 2 4 1.0
C2 5 1 1.0
C3 3 4 1.0
";
        let (sys, _, _) = pipeline(text, Some(&[4, 5]));
        let conds = check_conditions(&sys, &DVector::zeros(2)).unwrap();
        assert_eq!(conds["resistor_sector"], ConditionStatus::Fails);
    }

    #[test]
    fn hessian_blocks_for_unit_devices_as_expressions() {
        let text = "\
.nodes 5
.ref 5
R1 1 2 expr: x
L1 4 5 expr: 1
L2 2 3 expr: 1
C1 2 4 expr: x
C2 5 1 expr: x
C3 3 4 expr: x
";
        let (sys, e, _) = pipeline(text, Some(&[4, 5]));
        let (h, min_eig) = liapunov_hessian(&sys, &e, &DVector::zeros(2)).unwrap();
        // velocity block identity, position block [[2,-1],[-1,2]], zero cross blocks
        let expected = DMatrix::from_row_slice(4, 4, &[
            1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 2.0, -1.0,
            0.0, 0.0, -1.0, 2.0,
        ]);
        assert!((h - expected).amax() < 1e-12);
        assert!((min_eig - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_capacitor_slope_breaks_definiteness() {
        let (sys, e, _) = pipeline(".nodes 2\nL1 1 2 1.0\nC1 2 1 expr: x^3 - x\n", None);
        let (h, min_eig) = liapunov_hessian(&sys, &e, &DVector::zeros(1)).unwrap();
        assert!(min_eig < 0.0);
        assert!(!is_positive_definite(&h));
        let verdict = analyze_equilibrium(&sys, &e, &DVector::zeros(1), false).unwrap();
        assert_eq!(verdict.class, StabilityClass::Inconclusive);
    }

    #[test]
    fn classification_decision_table() {
        // pure LC with positive devices
        let (sys, e, _) = pipeline(".nodes 2\nL1 1 2 1.0\nC1 2 1 1.0\n", None);
        let (eqs, _) = find_equilibria(&sys, DEFAULT_SEED).unwrap();
        let v = analyze_equilibrium(&sys, &e, &eqs[0].q_e, false).unwrap();
        assert_eq!(v.class, StabilityClass::StableCenter);

        // linear RLC
        let (sys, e, _) = pipeline(SIX_BRANCH_EXAMPLE, Some(&[4, 5]));
        let (eqs, _) = find_equilibria(&sys, DEFAULT_SEED).unwrap();
        let v = analyze_equilibrium(&sys, &e, &eqs[0].q_e, false).unwrap();
        assert_eq!(v.class, StabilityClass::AsymptoticallyStable);

        // negative inductance leaves the verdict inconclusive
        let (sys, e, _) = pipeline(".nodes 2\nL1 1 2 -1.0\nC1 2 1 1.0\n", None);
        let (eqs, _) = find_equilibria(&sys, DEFAULT_SEED).unwrap();
        let v = analyze_equilibrium(&sys, &e, &eqs[0].q_e, false).unwrap();
        assert_eq!(v.class, StabilityClass::Inconclusive);
    }

    #[test]
    fn liapunov_value_and_decrease_near_reference_equilibrium() {
        // V > 0 on a punctured ball and dV/dt <= 0, strictly < 0 off q' = 0
        let text = format!("{SIX_BRANCH_EXAMPLE}.ic C1 1.0\n");
        let (sys, e, _) = pipeline(&text, Some(&[4, 5]));
        let (eqs, _) = find_equilibria(&sys, DEFAULT_SEED).unwrap();
        let q_e = &eqs[0].q_e;
        let v0 = e.value(q_e, &DVector::zeros(2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let dir = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
            if dir.amax() < 1e-3 {
                continue;
            }
            let z: DVector<f64> = 0.1 * &dir / dir.norm();
            let q = q_e + z.rows(2, 2);
            let qdot = z.rows(0, 2).into_owned();
            let val = e.value(&q, &qdot).unwrap() - v0;
            assert!(val > 0.0, "V not positive at offset {z:?}");
            let rate = crate::energy::energy_rate(&sys, &e, &q, &qdot).unwrap();
            assert!(rate <= 1e-12, "dV/dt positive: {rate}");
            // dissipation acts through the resistor coordinate here
            if qdot[0].abs() > 1e-6 {
                assert!(rate < 0.0, "dV/dt not strictly negative with motion");
            }
        }
    }
}
