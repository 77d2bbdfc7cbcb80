//! Affine configuration chart and degeneracy detection.
//!
//! Kirchhoff's current law integrates to `B^T x = c` for the branch-charge
//! vector `x`; the solution set is an affine space of dimension `m`
//! parameterized by a chart `x = N q + K`. The chart is found by exact
//! integer elimination with column pivoting on `B^T`; the non-pivot branch
//! charges become the coordinates `q`. `K` depends linearly on `c`, and the
//! integer coefficient matrix of that dependence is kept alongside the
//! numeric vector so the chart can be reported symbolically.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::CircuitGraph;
use crate::linalg::{solve_symbolic, IntMat};
use crate::netlist::{BranchKind, NetlistDoc};

#[derive(Debug, Clone)]
pub struct ConfigSpace {
    /// b x m integer chart matrix (the paper-level `N`).
    pub n_mat: IntMat,
    /// b x n integer coefficients with `K = k_coeffs * c`.
    pub k_coeffs: IntMat,
    /// Numeric offset vector `K` for the stored `c`.
    pub k_vec: DVector<f64>,
    /// Constant vector `c` fixing the affine space.
    pub c_vec: DVector<f64>,
    /// Branch indices (0-based, ascending) whose charges are the coordinates.
    pub coord_branches: Vec<usize>,
}

impl ConfigSpace {
    pub fn m(&self) -> usize {
        self.n_mat.ncols()
    }

    /// Reconstruct the full branch vector `x = N q + K`.
    pub fn branch_vector(&self, q: &DVector<f64>) -> DVector<f64> {
        self.n_mat.to_f64() * q + &self.k_vec
    }
}

/// Initial data mapped into chart coordinates.
#[derive(Debug, Clone)]
pub struct InitialState {
    pub c_vec: DVector<f64>,
    pub q0: DVector<f64>,
    pub qdot0: DVector<f64>,
    /// Infinity-norm residual of the velocity solve.
    pub residual: f64,
    /// True when the inductor rows left the velocity underdetermined.
    pub underdetermined: bool,
}

/// Outcome of the determinant conditions that gate the regular Birkhoffian.
#[derive(Debug, Clone, Serialize)]
pub struct DegeneracyReport {
    pub capacitor_loop_detected: bool,
    pub inductor_loop_detected: bool,
    pub null_vector: Option<Vec<f64>>,
    pub determinant_values: BTreeMap<String, f64>,
    /// Branch names participating in the degenerate loop, if one was found.
    pub loop_branches: Vec<String>,
}

impl DegeneracyReport {
    pub fn is_degenerate(&self) -> bool {
        self.capacitor_loop_detected || self.inductor_loop_detected
    }

    pub fn diagnostic(&self) -> String {
        let what = match (self.capacitor_loop_detected, self.inductor_loop_detected) {
            (true, true) => "capacitor loop and inductor loop",
            (true, false) => "loop without inductors (capacitor loop)",
            (false, true) => "loop without capacitors (inductor loop)",
            (false, false) => return "no degeneracy".to_string(),
        };
        format!("{what} through branches [{}]", self.loop_branches.join(", "))
    }
}

/// Build the chart `x = N q + K` for the constant vector `c`.
///
/// `coord_override` forces the listed branches (0-based) to be the
/// coordinates; by default the non-pivot columns of the elimination are
/// taken in ascending branch order.
pub fn build_chart(
    g: &CircuitGraph,
    c_vec: DVector<f64>,
    coord_override: Option<&[usize]>,
) -> Result<ConfigSpace> {
    let b = g.b;
    let bt = g.incidence.transpose();
    let mut allowed = vec![true; b];
    if let Some(coords) = coord_override {
        if coords.len() != g.m {
            return Err(Error::Chart(format!(
                "coordinate override needs exactly {} branches, got {}",
                g.m,
                coords.len()
            )));
        }
        for &c in coords {
            if c >= b {
                return Err(Error::Chart(format!(
                    "coordinate override branch index {} out of range (b = {b})",
                    c + 1
                )));
            }
            if !allowed[c] {
                return Err(Error::Chart("duplicate branch in coordinate override".to_string()));
            }
            allowed[c] = false;
        }
    }
    let sol = solve_symbolic(&bt, &allowed).map_err(|e| match e {
        Error::Chart(msg) => Error::Chart(format!(
            "cannot build a chart with the requested coordinates: {msg}"
        )),
        other => other,
    })?;
    let n_mat = sol.free_map;
    let k_coeffs = sol.rhs_map;
    if c_vec.len() != g.n {
        return Err(Error::Chart(format!(
            "constant vector has length {}, expected {}",
            c_vec.len(),
            g.n
        )));
    }
    let k_vec = k_coeffs.to_f64() * &c_vec;
    let cs = ConfigSpace {
        n_mat,
        k_coeffs,
        k_vec,
        c_vec,
        coord_branches: sol.free_cols,
    };
    // chart identities: B^T N = 0 and B^T k_coeffs = I, exactly
    if !bt.mul(&cs.n_mat).is_zero() || bt.mul(&cs.k_coeffs) != IntMat::identity(g.n) {
        return Err(Error::Internal("chart identities violated".to_string()));
    }
    Ok(cs)
}

/// Branch initial-charge vector: capacitors carry their initial charge,
/// resistor and inductor charges are gauged to zero.
fn branch_initial_charges(doc: &NetlistDoc) -> DVector<f64> {
    DVector::from_iterator(
        doc.branch_count(),
        doc.branches.iter().map(|br| match br.kind {
            BranchKind::Capacitor => doc.initial_condition(&br.name),
            _ => 0.0,
        }),
    )
}

/// Constant vector `c = B^T x(0)` fixed by the initial charges.
pub fn constants_from_initial_data(doc: &NetlistDoc, g: &CircuitGraph) -> DVector<f64> {
    g.incidence.to_f64().transpose() * branch_initial_charges(doc)
}

/// Map the netlist initial data to `(c, q(0), q'(0))` in the given chart.
///
/// Coordinates pick up the capacitor charges directly; velocities solve the
/// inductor rows of `N` against the initial currents in the least-squares
/// sense, which is exact when those rows have full column rank.
pub fn initial_state(
    doc: &NetlistDoc,
    g: &CircuitGraph,
    cs: &ConfigSpace,
) -> Result<InitialState> {
    let x0 = branch_initial_charges(doc);
    let c_vec = g.incidence.to_f64().transpose() * &x0;
    let q0 = DVector::from_iterator(
        cs.m(),
        cs.coord_branches.iter().map(|&l| x0[l]),
    );

    let inductors: Vec<usize> = (0..doc.branch_count())
        .filter(|&l| doc.branches[l].kind == BranchKind::Inductor)
        .collect();
    let k = inductors.len();
    let m = cs.m();
    let mut n_l = DMatrix::<f64>::zeros(k, m);
    let mut i_l = DVector::<f64>::zeros(k);
    for (r, &l) in inductors.iter().enumerate() {
        for j in 0..m {
            n_l[(r, j)] = cs.n_mat[(l, j)] as f64;
        }
        i_l[r] = doc.initial_condition(&doc.branches[l].name);
    }
    let (qdot0, rank) = if k == 0 {
        (DVector::zeros(m), 0)
    } else {
        let svd = n_l.clone().svd(true, true);
        let rank = svd.rank(1e-12);
        let qdot = svd
            .solve(&i_l, 1e-12)
            .map_err(|e| Error::Internal(format!("initial-velocity solve failed: {e}")))?;
        (qdot, rank)
    };
    let residual = if k == 0 {
        0.0
    } else {
        (n_l * &qdot0 - &i_l).amax()
    };
    if residual > 1e-9 {
        return Err(Error::InconsistentCurrents { residual });
    }
    Ok(InitialState {
        c_vec,
        q0,
        qdot0,
        residual,
        underdetermined: rank < m,
    })
}

/// Convenience: constants from the initial data, then the chart, then the
/// mapped initial state.
pub fn chart_with_initial_state(
    doc: &NetlistDoc,
    g: &CircuitGraph,
    coord_override: Option<&[usize]>,
) -> Result<(ConfigSpace, InitialState)> {
    let c = constants_from_initial_data(doc, g);
    let cs = build_chart(g, c, coord_override)?;
    let init = initial_state(doc, g, &cs)?;
    Ok((cs, init))
}

/// Evaluate the determinant conditions for a regular Birkhoffian.
///
/// The inductor-weighted mass determinant vanishes exactly when the network
/// has a loop free of inductors (a capacitor loop); for all-linear networks
/// the capacitor-weighted stiffness determinant likewise detects loops free
/// of capacitors. Nonlinear inductances are evaluated at zero velocity.
pub fn check_degeneracy(cs: &ConfigSpace, doc: &NetlistDoc) -> Result<DegeneracyReport> {
    let m = cs.m();
    let all_linear = !doc.has_nonlinear_device();
    let mut dets = BTreeMap::new();

    let mut mass = DMatrix::<f64>::zeros(m, m);
    let mut stiff = DMatrix::<f64>::zeros(m, m);
    for (l, br) in doc.branches.iter().enumerate() {
        let n_row = DVector::from_iterator(m, (0..m).map(|j| cs.n_mat[(l, j)] as f64));
        match br.kind {
            BranchKind::Inductor => {
                let (l0, _) = br.model.law(BranchKind::Inductor, 0.0)?;
                mass += l0 * &n_row * n_row.transpose();
            }
            BranchKind::Capacitor if all_linear => {
                let (_, slope) = br.model.law(BranchKind::Capacitor, 0.0)?;
                stiff += slope * &n_row * n_row.transpose();
            }
            _ => {}
        }
    }

    let mass_det = mass.clone().determinant();
    dets.insert("mass".to_string(), mass_det);
    let capacitor_loop = near_zero_det(mass_det, &mass);

    let inductor_loop = if all_linear {
        let d = stiff.clone().determinant();
        dets.insert("stiffness".to_string(), d);
        near_zero_det(d, &stiff)
    } else {
        false
    };

    let mut null_vector = None;
    let mut loop_branches = Vec::new();
    if capacitor_loop || inductor_loop {
        let singular = if capacitor_loop { &mass } else { &stiff };
        let v = smallest_singular_vector(singular);
        // branches with nonzero chart participation along the null direction
        for (l, br) in doc.branches.iter().enumerate() {
            let part: f64 = (0..m).map(|j| cs.n_mat[(l, j)] as f64 * v[j]).sum();
            if part.abs() > 1e-9 {
                loop_branches.push(br.name.clone());
            }
        }
        null_vector = Some(v.iter().copied().collect());
    }

    Ok(DegeneracyReport {
        capacitor_loop_detected: capacitor_loop,
        inductor_loop_detected: inductor_loop,
        null_vector,
        determinant_values: dets,
        loop_branches,
    })
}

/// Scale-aware zero test: compares against the Hadamard bound of the matrix.
fn near_zero_det(det: f64, mat: &DMatrix<f64>) -> bool {
    let scale: f64 = (0..mat.nrows())
        .map(|i| mat.row(i).amax().max(1e-300))
        .product();
    det.abs() <= 1e-12 * scale.max(1.0)
}

fn smallest_singular_vector(mat: &DMatrix<f64>) -> DVector<f64> {
    let svd = mat.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let idx = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    v_t.row(idx).transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{parse_netlist, SIX_BRANCH_EXAMPLE};

    fn six_branch() -> (NetlistDoc, CircuitGraph) {
        let doc = parse_netlist(SIX_BRANCH_EXAMPLE).unwrap();
        let g = CircuitGraph::build(&doc).unwrap();
        (doc, g)
    }

    #[test]
    fn chart_matches_reference_with_override() {
        let (_, g) = six_branch();
        let c = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0]);
        let cs = build_chart(&g, c, Some(&[4, 5])).unwrap();
        assert_eq!(cs.coord_branches, vec![4, 5]);
        // N equals the loop matrix of the reference example entry for entry
        let expected_n = IntMat::from_rows(&[
            vec![1, 0],
            vec![1, 0],
            vec![0, 1],
            vec![1, -1],
            vec![1, 0],
            vec![0, 1],
        ]);
        assert_eq!(cs.n_mat, expected_n);
        // K = (c1, c1+c2+c3+c4, -c3, c1+c2+c3, 0, 0)
        let expected_k = IntMat::from_rows(&[
            vec![1, 0, 0, 0],
            vec![1, 1, 1, 1],
            vec![0, 0, -1, 0],
            vec![1, 1, 1, 0],
            vec![0, 0, 0, 0],
            vec![0, 0, 0, 0],
        ]);
        assert_eq!(cs.k_coeffs, expected_k);
    }

    #[test]
    fn default_pivoting_is_deterministic_and_valid() {
        let (_, g) = six_branch();
        let c = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let cs = build_chart(&g, c.clone(), None).unwrap();
        // substitute random q and check B^T (N q + K) = c
        for trial in 0..10 {
            let q = DVector::from_fn(cs.m(), |i, _| ((trial + i) as f64).sin());
            let x = cs.branch_vector(&q);
            let lhs = g.incidence.to_f64().transpose() * x;
            assert!((lhs - &c).amax() < 1e-12);
        }
    }

    #[test]
    fn homogeneous_constants_leave_zero_offset() {
        let (_, g) = six_branch();
        let cs = build_chart(&g, DVector::zeros(4), Some(&[4, 5])).unwrap();
        assert!(cs.k_vec.amax() == 0.0);
        for &cb in &cs.coord_branches {
            assert_eq!(cs.k_vec[cb], 0.0);
        }
    }

    #[test]
    fn initial_state_reproduces_reference_mapping() {
        let text = format!("{SIX_BRANCH_EXAMPLE}.ic C1 0.25\n.ic C2 -1.5\n.ic C3 2.0\n.ic L1 0.5\n.ic L2 -0.75\n");
        let doc = parse_netlist(&text).unwrap();
        let g = CircuitGraph::build(&doc).unwrap();
        let (cs, init) = chart_with_initial_state(&doc, &g, Some(&[4, 5])).unwrap();
        // q(0) = (charge of C2, charge of C3); velocities are the inductor currents
        assert_eq!(init.q0.as_slice(), &[-1.5, 2.0]);
        assert_eq!(init.qdot0.as_slice(), &[0.5, -0.75]);
        assert!(!init.underdetermined);
        // the combination c1+c2+c3 equals q1(0) - q2(0) + q3(0)
        let combo = init.c_vec[0] + init.c_vec[1] + init.c_vec[2];
        assert_eq!(combo, 0.25 - (-1.5) + 2.0);
        // chart round-trip recovers the capacitor charges exactly
        let x = cs.branch_vector(&init.q0);
        assert_eq!(x[3], 0.25);
        assert_eq!(x[4], -1.5);
        assert_eq!(x[5], 2.0);
    }

    #[test]
    fn all_zero_initial_data() {
        let (doc, g) = six_branch();
        let (_, init) = chart_with_initial_state(&doc, &g, None).unwrap();
        assert!(init.c_vec.amax() == 0.0);
        assert!(init.q0.amax() == 0.0);
        assert!(init.qdot0.amax() == 0.0);
    }

    #[test]
    fn degeneracy_clean_on_reference_circuit() {
        let (doc, g) = six_branch();
        let (cs, _) = chart_with_initial_state(&doc, &g, Some(&[4, 5])).unwrap();
        let rep = check_degeneracy(&cs, &doc).unwrap();
        assert!(!rep.is_degenerate());
        assert_eq!(rep.determinant_values["mass"], 1.0);
        assert_eq!(rep.determinant_values["stiffness"], 3.0);
    }

    #[test]
    fn capacitor_loop_is_flagged() {
        let doc = parse_netlist(".nodes 2\nC1 1 2 1.0\nC2 2 1 1.0\n").unwrap();
        let g = CircuitGraph::build(&doc).unwrap();
        let (cs, _) = chart_with_initial_state(&doc, &g, None).unwrap();
        let rep = check_degeneracy(&cs, &doc).unwrap();
        assert!(rep.capacitor_loop_detected);
        assert_eq!(rep.determinant_values["mass"], 0.0);
        assert_eq!(rep.loop_branches, vec!["C1".to_string(), "C2".to_string()]);
        assert!(rep.diagnostic().contains("capacitor loop"));
    }

    #[test]
    fn inductor_loop_is_flagged() {
        let doc = parse_netlist(".nodes 2\nL1 1 2 1.0\nL2 2 1 1.0\n").unwrap();
        let g = CircuitGraph::build(&doc).unwrap();
        let (cs, _) = chart_with_initial_state(&doc, &g, None).unwrap();
        let rep = check_degeneracy(&cs, &doc).unwrap();
        assert!(rep.inductor_loop_detected);
        assert!(!rep.capacitor_loop_detected);
    }

    #[test]
    fn stiffness_sign_stable_under_large_capacitor() {
        let text = "\
.nodes 5
.ref 5
R1 1 2 1.0
L1 4 5 1.0
L2 2 3 1.0
C1 2 4 1.0
C2 5 1 1.0e12
C3 3 4 1.0
";
        let doc = parse_netlist(text).unwrap();
        let g = CircuitGraph::build(&doc).unwrap();
        let (cs, _) = chart_with_initial_state(&doc, &g, Some(&[4, 5])).unwrap();
        let rep = check_degeneracy(&cs, &doc).unwrap();
        assert!(!rep.is_degenerate());
        assert!(rep.determinant_values["stiffness"] > 0.0);
    }

    #[test]
    fn inconsistent_initial_currents_are_rejected() {
        // two inductors in series must carry the same current
        let text = "\
.nodes 3
L1 1 2 1.0
L2 2 3 1.0
C1 3 1 1.0
.ic L1 1.0
.ic L2 -1.0
";
        let doc = parse_netlist(text).unwrap();
        let g = CircuitGraph::build(&doc).unwrap();
        let err = chart_with_initial_state(&doc, &g, None);
        assert!(matches!(err, Err(Error::InconsistentCurrents { .. })));
    }
}
