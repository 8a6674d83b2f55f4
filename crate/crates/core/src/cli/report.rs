use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::features::FeatureSet;
use crate::hydro::DensitySequence;
use crate::manifold::combined_l2;
use crate::neural::{generate_conditioned, generate_ensemble, GeneratorModel};

/// One case of the reconstruction/projection comparison, in percent of ρ0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub case: String,
    /// ‖ρ_proj − ρ_GT‖ / ρ0
    pub proj_vs_truth_pct: f64,
    /// ‖ρ_GT − ρ_GAN‖ / ρ0
    pub truth_vs_gan_pct: f64,
    /// ‖ρ_GAN − ρ_proj‖ / ρ0
    pub gan_vs_proj_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rho_ref: f64,
    pub rows: Vec<EvaluationRow>,
}

pub fn evaluate_case(
    case: &str,
    truth: &DensitySequence,
    gan: &DensitySequence,
    projected: &DensitySequence,
    rho_ref: f64,
) -> Result<EvaluationRow, CliError> {
    let pct = |a, b| -> Result<f64, CliError> { Ok(100.0 * combined_l2(a, b)? / rho_ref) };
    Ok(EvaluationRow {
        case: case.to_string(),
        proj_vs_truth_pct: pct(projected, truth)?,
        truth_vs_gan_pct: pct(truth, gan)?,
        gan_vs_proj_pct: pct(gan, projected)?,
    })
}

impl EvaluationReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("case,proj_vs_truth_pct,truth_vs_gan_pct,gan_vs_proj_pct\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:?},{:?},{:?}\n",
                r.case, r.proj_vs_truth_pct, r.truth_vs_gan_pct, r.gan_vs_proj_pct
            ));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub shock_um: f64,
    pub edge_um: f64,
    pub samples: usize,
    pub seed: u64,
    pub dropout_at_test: bool,
    /// Ensemble-mean error with the exact features, percent of ρ0.
    pub rmse_clean_pct: f64,
    /// Ensemble-mean error with per-sample perturbed features, percent of ρ0.
    pub rmse_perturbed_pct: f64,
    /// (perturbed − clean) / clean.
    pub relative_increase: f64,
}

/// Features with every shock radius moved by U[−δs, δs] and every edge
/// radius by U[−δe, δe], one draw per feature per snapshot.
pub fn perturb_features(f: &FeatureSet, shock_cm: f64, edge_cm: f64, rng: &mut ChaCha8Rng) -> FeatureSet {
    let mut jitter = |v: f64, d: f64| if d > 0.0 { v + rng.random_range(-d..=d) } else { v };
    FeatureSet {
        times_us: f.times_us.clone(),
        shock_cm: f.shock_cm.iter().map(|&v| jitter(v, shock_cm)).collect(),
        edge_cm: f.edge_cm.iter().map(|&v| jitter(v, edge_cm)).collect(),
    }
}

/// Compares the ensemble mean for exact features with the mean over samples
/// that each see independently perturbed features. Both ensembles use the
/// same noise draws.
#[allow(clippy::too_many_arguments)]
pub fn perturbation_study(
    gen: &GeneratorModel,
    features: &FeatureSet,
    truth: &DensitySequence,
    shock_um: f64,
    edge_um: f64,
    samples: usize,
    dropout_at_test: bool,
    seed: u64,
) -> Result<PerturbationReport, CliError> {
    let rho_ref = gen.norm.rho_ref;
    let clean = generate_ensemble(gen, features, samples, dropout_at_test, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let perturbed: Vec<FeatureSet> = (0..samples)
        .map(|_| perturb_features(features, shock_um * 1e-4, edge_um * 1e-4, &mut rng))
        .collect();
    let noisy = generate_conditioned(gen, &perturbed, dropout_at_test, seed)?;
    let rmse_clean_pct = 100.0 * combined_l2(&clean.mean, truth)? / rho_ref;
    let rmse_perturbed_pct = 100.0 * combined_l2(&noisy.mean, truth)? / rho_ref;
    Ok(PerturbationReport {
        shock_um,
        edge_um,
        samples,
        seed,
        dropout_at_test,
        rmse_clean_pct,
        rmse_perturbed_pct,
        relative_increase: (rmse_perturbed_pct - rmse_clean_pct) / rmse_clean_pct,
    })
}
