//! Serializable snapshots of core results, in the shapes the report files
//! promise: coefficient tables keyed by exponent tuples, matrices as row
//! lists, complex numbers as [re, im] pairs.

use nalgebra::DMatrix;
use serde::Serialize;

use koopman_core::bilinearize::BilinearModel;
use koopman_core::liealg::IsomorphismCertificate;
use koopman_core::linearize::ConjugacyMap;

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

#[derive(Serialize)]
pub struct TermRecord {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

#[derive(Serialize)]
pub struct CTermRecord {
    pub exponents: Vec<u32>,
    pub re: f64,
    pub im: f64,
}

#[derive(Serialize)]
pub struct WarningRecord {
    pub target: usize,
    pub witness: Vec<u32>,
    pub gap: f64,
}

/// Linearizing map file contents: spectrum, real coefficient table per
/// coordinate, complex table per eigenfunction, pairing, pull-back.
#[derive(Serialize)]
pub struct MapRecord {
    pub n: usize,
    pub k: u32,
    pub tol: f64,
    pub eigenvalues: Vec<[f64; 2]>,
    pub pairing: Vec<Option<usize>>,
    pub jacobian: Vec<Vec<f64>>,
    pub psi: Vec<Vec<TermRecord>>,
    pub eigenfunctions: Vec<Vec<CTermRecord>>,
    pub min_denominator: f64,
    pub realification_residue: f64,
    pub warnings: Vec<WarningRecord>,
    pub pullback_horizon: f64,
}

impl MapRecord {
    pub fn from_map(map: &ConjugacyMap) -> Self {
        let spec = map.spectrum();
        let psi = (0..map.n())
            .map(|i| {
                map.psi_poly()
                    .component(i)
                    .iter()
                    .map(|(m, c)| TermRecord {
                        exponents: m.exponents().to_vec(),
                        coeff: *c,
                    })
                    .collect()
            })
            .collect();
        let eigenfunctions = (0..map.n())
            .map(|i| {
                map.eigenfunction(i)
                    .terms()
                    .iter()
                    .map(|(m, c)| CTermRecord {
                        exponents: m.exponents().to_vec(),
                        re: c.re,
                        im: c.im,
                    })
                    .collect()
            })
            .collect();
        MapRecord {
            n: map.n(),
            k: map.k(),
            tol: map.tol(),
            eigenvalues: spec.eigenvalues().iter().map(|l| [l.re, l.im]).collect(),
            pairing: spec.pairing().to_vec(),
            jacobian: matrix_rows(map.jacobian()),
            psi,
            eigenfunctions,
            min_denominator: map.min_denominator(),
            realification_residue: map.realification_residue(),
            warnings: map
                .warnings()
                .iter()
                .map(|w| WarningRecord {
                    target: w.target,
                    witness: w.witness.clone(),
                    gap: w.gap,
                })
                .collect(),
            pullback_horizon: map.pullback().horizon,
        }
    }
}

#[derive(Serialize)]
pub struct CertificateRecord {
    pub verdict: String,
    pub dim_fields: usize,
    pub dim_matrices: usize,
    pub witness: Option<String>,
    pub depth: usize,
    pub degree_cap: u32,
    pub rank_tol: f64,
    pub max_coord_gap: f64,
    pub driver: String,
}

impl CertificateRecord {
    pub fn from_certificate(c: &IsomorphismCertificate) -> Self {
        CertificateRecord {
            verdict: c.verdict.to_string(),
            dim_fields: c.dim_vf,
            dim_matrices: c.dim_mat,
            witness: c.witness.as_ref().map(|w| w.to_string()),
            depth: c.depth,
            degree_cap: c.degree_cap,
            rank_tol: c.rank_tol,
            max_coord_gap: c.max_coord_gap,
            driver: c.driver.to_string(),
        }
    }
}

/// Bilinear model file contents.
#[derive(Serialize)]
pub struct ModelRecord {
    pub n: usize,
    pub input_dim: usize,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<Vec<f64>>>,
    pub psi: MapRecord,
    pub certificate: CertificateRecord,
    pub conditions: koopman_core::conditions::ConditionsReport,
    pub residual: f64,
    pub fit_gap: f64,
    pub samples_used: usize,
}

impl ModelRecord {
    pub fn from_model(m: &BilinearModel) -> Self {
        ModelRecord {
            n: m.system().n(),
            input_dim: m.system().input_dim(),
            a: matrix_rows(m.a()),
            b: m.b().iter().map(matrix_rows).collect(),
            psi: MapRecord::from_map(m.psi()),
            certificate: CertificateRecord::from_certificate(m.certificate()),
            conditions: m.conditions().clone(),
            residual: m.residual(),
            fit_gap: m.fit_gap(),
            samples_used: m.samples_used(),
        }
    }
}
