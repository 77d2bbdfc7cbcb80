//! Assembly of the Birkhoffian force components and the induced second-order
//! vector field.
//!
//! Every device contributes through a scalar argument: inductors and
//! resistors see `sigma_a(q') = sum_l N^a_l q'^l`, capacitors see
//! `s_alpha(q) = sum_l N^alpha_l q^l + K^alpha`. The force components are
//!
//! ```text
//! Q_j(q, q', q'') = sum_i mass(q')_ji q''^i + resistive(q')_j
//!                   + capacitive(q)_j + const_j
//! ```
//!
//! with `mass(q')_ji = sum_a N^a_j N^a_i L_a(sigma_a(q'))`. All-linear
//! networks keep closed-form matrices; any expression device switches the
//! system to composition of the device laws. The four cases are tagged by
//! (linear or nonlinear) x (LC or RLC).

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::configspace::ConfigSpace;
use crate::error::{Error, Result};
use crate::netlist::{BranchKind, DeviceModel, NetlistDoc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseTag {
    LinLc,
    NonlinLc,
    LinRlc,
    NonlinRlc,
}

impl CaseTag {
    pub fn is_dissipative(self) -> bool {
        matches!(self, CaseTag::LinRlc | CaseTag::NonlinRlc)
    }

    pub fn is_linear(self) -> bool {
        matches!(self, CaseTag::LinLc | CaseTag::LinRlc)
    }

    pub fn name(self) -> &'static str {
        match self {
            CaseTag::LinLc => "linear LC",
            CaseTag::NonlinLc => "nonlinear LC",
            CaseTag::LinRlc => "linear RLC",
            CaseTag::NonlinRlc => "nonlinear RLC",
        }
    }
}

/// One device together with its chart row and offset.
#[derive(Debug, Clone)]
pub(crate) struct DeviceRow {
    pub name: String,
    pub kind: BranchKind,
    pub n_row: DVector<f64>,
    /// Chart offset `K` on this branch (capacitors only use it).
    pub k_comp: f64,
    pub model: DeviceModel,
}

impl DeviceRow {
    /// Scalar argument of the device law: `sigma = n_row . q'` for inductors
    /// and resistors, `s = n_row . q + K` for capacitors.
    pub fn scalar_arg(&self, state: &DVector<f64>) -> f64 {
        let base: f64 = self.n_row.dot(state);
        match self.kind {
            BranchKind::Capacitor => base + self.k_comp,
            _ => base,
        }
    }

    pub fn law(&self, x: f64) -> Result<(f64, f64)> {
        self.model.law(self.kind, x)
    }
}

/// Precomputed matrices for the all-linear path.
#[derive(Debug, Clone)]
struct LinearParts {
    mass: DMatrix<f64>,
    damping: DMatrix<f64>,
    stiffness: DMatrix<f64>,
    const_term: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct BirkhoffSystem {
    pub case_tag: CaseTag,
    m: usize,
    resistors: Vec<DeviceRow>,
    inductors: Vec<DeviceRow>,
    capacitors: Vec<DeviceRow>,
    linear: Option<LinearParts>,
}

/// Assemble the Birkhoffian for the chart and device set.
pub fn assemble(cs: &ConfigSpace, doc: &NetlistDoc) -> Result<BirkhoffSystem> {
    BirkhoffSystem::assemble(cs, doc)
}

impl BirkhoffSystem {
    pub fn assemble(cs: &ConfigSpace, doc: &NetlistDoc) -> Result<BirkhoffSystem> {
        let m = cs.m();
        let mut resistors = Vec::new();
        let mut inductors = Vec::new();
        let mut capacitors = Vec::new();
        for (l, br) in doc.branches.iter().enumerate() {
            let row = DeviceRow {
                name: br.name.clone(),
                kind: br.kind,
                n_row: DVector::from_iterator(m, (0..m).map(|j| cs.n_mat[(l, j)] as f64)),
                k_comp: cs.k_vec[l],
                model: br.model.clone(),
            };
            match br.kind {
                BranchKind::Resistor => resistors.push(row),
                BranchKind::Inductor => inductors.push(row),
                BranchKind::Capacitor => capacitors.push(row),
            }
        }
        let r = resistors.len();
        let nonlinear = doc.has_nonlinear_device();
        let case_tag = match (r == 0, nonlinear) {
            (true, false) => CaseTag::LinLc,
            (true, true) => CaseTag::NonlinLc,
            (false, false) => CaseTag::LinRlc,
            (false, true) => CaseTag::NonlinRlc,
        };

        let linear = if nonlinear {
            None
        } else {
            let mut mass = DMatrix::zeros(m, m);
            let mut damping = DMatrix::zeros(m, m);
            let mut stiffness = DMatrix::zeros(m, m);
            let mut const_term = DVector::zeros(m);
            for d in &inductors {
                let (l0, _) = d.law(0.0)?;
                mass += l0 * &d.n_row * d.n_row.transpose();
            }
            for d in &resistors {
                let (_, slope) = d.law(0.0)?;
                damping += slope * &d.n_row * d.n_row.transpose();
            }
            for d in &capacitors {
                let (_, slope) = d.law(0.0)?;
                stiffness += slope * &d.n_row * d.n_row.transpose();
                const_term += slope * d.k_comp * &d.n_row;
            }
            Some(LinearParts { mass, damping, stiffness, const_term })
        };

        Ok(BirkhoffSystem {
            case_tag,
            m,
            resistors,
            inductors,
            capacitors,
            linear,
        })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub(crate) fn resistor_rows(&self) -> &[DeviceRow] {
        &self.resistors
    }

    pub(crate) fn inductor_rows(&self) -> &[DeviceRow] {
        &self.inductors
    }

    pub(crate) fn capacitor_rows(&self) -> &[DeviceRow] {
        &self.capacitors
    }

    /// Symmetric mass matrix `sum_a N^a N^a^T L_a(sigma_a(q'))`.
    pub fn mass(&self, qdot: &DVector<f64>) -> Result<DMatrix<f64>> {
        if let Some(lin) = &self.linear {
            return Ok(lin.mass.clone());
        }
        let mut mass = DMatrix::zeros(self.m, self.m);
        for d in &self.inductors {
            let (val, _) = d.law(d.scalar_arg(qdot))?;
            mass += val * &d.n_row * d.n_row.transpose();
        }
        Ok(mass)
    }

    /// Resistive force `sum_G N^G_j R_G(sigma_G(q'))`; zero for LC networks.
    pub fn resistive(&self, qdot: &DVector<f64>) -> Result<DVector<f64>> {
        if let Some(lin) = &self.linear {
            return Ok(&lin.damping * qdot);
        }
        let mut out = DVector::zeros(self.m);
        for d in &self.resistors {
            let (val, _) = d.law(d.scalar_arg(qdot))?;
            out += val * &d.n_row;
        }
        Ok(out)
    }

    /// Capacitive force. Linear systems return the homogeneous part
    /// `stiffness * q`; the affine remainder lives in [`Self::const_term`].
    pub fn capacitive(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        if let Some(lin) = &self.linear {
            return Ok(&lin.stiffness * q);
        }
        let mut out = DVector::zeros(self.m);
        for d in &self.capacitors {
            let (val, _) = d.law(d.scalar_arg(q))?;
            out += val * &d.n_row;
        }
        Ok(out)
    }

    /// Constant force term `sum_alpha N^alpha K^alpha / C_alpha` in the
    /// linear cases; zero otherwise (the offsets ride inside `s_alpha`).
    pub fn const_term(&self) -> DVector<f64> {
        match &self.linear {
            Some(lin) => lin.const_term.clone(),
            None => DVector::zeros(self.m),
        }
    }

    /// The force components `Q(q, q', q'')`.
    pub fn components(
        &self,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        qddot: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        Ok(self.mass(qdot)? * qddot
            + self.resistive(qdot)?
            + self.capacitive(q)?
            + self.const_term())
    }

    /// Regularity: the mass determinant stays away from zero at rest and at
    /// each provided velocity sample.
    pub fn regularity(&self, qdot_samples: &[DVector<f64>]) -> Result<bool> {
        let zero = DVector::zeros(self.m);
        for qdot in std::iter::once(&zero).chain(qdot_samples.iter()) {
            let mass = self.mass(qdot)?;
            if near_singular(&mass) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Explicit acceleration `q'' = -mass(q')^{-1} (resistive + capacitive + const)`.
    ///
    /// The residual of the implicit system is verified after the solve.
    pub fn acceleration(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<DVector<f64>> {
        let mass = self.mass(qdot)?;
        let singular = || Error::SingularMass {
            q: q.iter().copied().collect(),
            qdot: qdot.iter().copied().collect(),
        };
        if near_singular(&mass) {
            return Err(singular());
        }
        let force = self.resistive(qdot)? + self.capacitive(q)? + self.const_term();
        let qddot = mass.clone().lu().solve(&(-&force)).ok_or_else(singular)?;
        let residual = (mass * &qddot + force).amax();
        let scale = 1.0 + q.amax().max(qdot.amax()).max(qddot.amax());
        if residual > 1e-10 * scale {
            return Err(Error::Internal(format!(
                "acceleration residual {residual:e} exceeds tolerance at scale {scale:e}"
            )));
        }
        Ok(qddot)
    }

    /// Residual of the equilibrium system `Q(q, 0, 0)`.
    pub fn equilibrium_residual(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        let zero = DVector::zeros(self.m);
        Ok(self.resistive(&zero)? + self.capacitive(q)? + self.const_term())
    }

    /// Jacobian of the equilibrium residual,
    /// `sum_alpha N^alpha N^alpha^T C'_alpha(s_alpha(q))`.
    pub fn equilibrium_jacobian(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        if let Some(lin) = &self.linear {
            return Ok(lin.stiffness.clone());
        }
        let mut jac = DMatrix::zeros(self.m, self.m);
        for d in &self.capacitors {
            let (_, slope) = d.law(d.scalar_arg(q))?;
            jac += slope * &d.n_row * d.n_row.transpose();
        }
        Ok(jac)
    }
}

/// Scale-aware near-zero determinant test against the Hadamard bound.
pub(crate) fn near_singular(mass: &DMatrix<f64>) -> bool {
    let det = mass.clone().determinant();
    let scale: f64 = (0..mass.nrows())
        .map(|i| mass.row(i).amax().max(1e-300))
        .product();
    det.abs() <= 1e-12 * scale.max(1.0)
}
