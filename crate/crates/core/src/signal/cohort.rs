//! Synthetic multichannel cohort with known class covariance structure.
//!
//! Each class has a ground-truth SPD template. A patient's covariance is the
//! template moved along a random unit tangent direction by
//! `within_class_dispersion` (a Riemannian distance). Each recording is a
//! zero-mean Gaussian series with the patient covariance, an amplitude gain
//! drawn per recording, optional isotropic noise and one sharp R-peak spike
//! on the reference lead so that alignment has something to find.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{MultiChannelRecording, SignalError};
use crate::class::ClassId;
use crate::rng::stream_rng;
use crate::spd::{cholesky, pack_upper, symmetric_eigen, unpack_upper, BasePoint, SpdMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCount {
    pub name: String,
    pub patients: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecordingCountSpec {
    pub mean: f64,
    pub min: usize,
    pub max: usize,
}

impl Default for RecordingCountSpec {
    fn default() -> Self {
        RecordingCountSpec { mean: 10.0, min: 2, max: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSpec {
    pub classes: Vec<ClassCount>,
    pub recordings_per_patient: RecordingCountSpec,
    /// Explicit class templates (one `channels × channels` matrix per class);
    /// generated from `template_separation` when absent.
    pub class_covariances: Option<Vec<Vec<Vec<f64>>>>,
    pub channels: usize,
    pub samples_per_recording: usize,
    pub sample_rate_hz: f64,
    /// Distance of every class template from the common centre, in tangent coordinates.
    pub template_separation: f64,
    /// Riemannian distance of each patient covariance from its class template.
    pub within_class_dispersion: f64,
    /// Number of modes of patient variation: random orthonormal tangent
    /// directions applied at each class template.
    pub variation_rank: usize,
    /// One set of modes for all classes, rather than a set per class.
    pub shared_variation: bool,
    /// Standard deviation of each mode's coefficient.
    pub variation_scale: f64,
    /// Standard deviation of the per-recording log amplitude gain.
    pub gain_log_std: f64,
    pub noise_scale: f64,
    /// Spike height in units of the reference lead's standard deviation.
    pub peak_amplitude: f64,
    pub reference_channel: usize,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        let classes = [("ToF", 173), ("ASD", 77), ("PA", 73), ("Fontan", 66), ("Mustard", 47)]
            .into_iter()
            .map(|(name, patients)| ClassCount { name: name.to_owned(), patients })
            .collect();
        CohortSpec {
            classes,
            recordings_per_patient: RecordingCountSpec::default(),
            class_covariances: None,
            channels: 12,
            samples_per_recording: 600,
            sample_rate_hz: 500.0,
            template_separation: 1.0,
            within_class_dispersion: 0.6,
            variation_rank: 0,
            shared_variation: true,
            variation_scale: 0.0,
            gain_log_std: 0.3,
            noise_scale: 0.05,
            peak_amplitude: 8.0,
            reference_channel: 1,
            seed: 20_231_006,
        }
    }
}

/// Ground truth for one synthetic patient.
#[derive(Debug, Clone)]
pub struct PatientPlan {
    pub index: usize,
    pub patient_id: String,
    pub label: ClassId,
    pub covariance: SpdMatrix<f64>,
    pub recordings: usize,
}

impl CohortSpec {
    pub fn validate(&self) -> Result<(), SignalError> {
        let bad = |msg: String| Err(SignalError::InvalidSpec(msg));
        if self.classes.len() < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes.len()));
        }
        let mut names: Vec<&str> = self.classes.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.classes.len() || names.iter().any(|n| n.is_empty()) {
            return bad("class names must be non-empty and unique".into());
        }
        for c in &self.classes {
            if c.patients < 2 {
                return bad(format!("class {} has {} patients; leave-out splitting needs at least 2", c.name, c.patients));
            }
        }
        let r = &self.recordings_per_patient;
        if r.min == 0 || r.min > r.max || !(r.mean >= r.min as f64 && r.mean <= r.max as f64) {
            return bad(format!("recordings_per_patient {r:?} is inconsistent"));
        }
        if self.channels == 0 || self.samples_per_recording < 2 {
            return bad("channels must be >= 1 and samples_per_recording >= 2".into());
        }
        if self.reference_channel >= self.channels {
            return bad(format!("reference_channel {} >= channels {}", self.reference_channel, self.channels));
        }
        for (name, v) in [
            ("sample_rate_hz", self.sample_rate_hz),
            ("template_separation", self.template_separation),
            ("within_class_dispersion", self.within_class_dispersion),
            ("variation_scale", self.variation_scale),
            ("gain_log_std", self.gain_log_std),
            ("noise_scale", self.noise_scale),
            ("peak_amplitude", self.peak_amplitude),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be a finite non-negative number, got {v}"));
            }
        }
        if !(self.sample_rate_hz > 0.0) {
            return bad("sample_rate_hz must be positive".into());
        }
        if let Some(t) = &self.class_covariances {
            if t.len() != self.classes.len() {
                return bad(format!("{} class covariances for {} classes", t.len(), self.classes.len()));
            }
        }
        Ok(())
    }

    pub fn total_patients(&self) -> usize {
        self.classes.iter().map(|c| c.patients).sum()
    }

    pub fn templates(&self) -> Result<Vec<SpdMatrix<f64>>, SignalError> {
        match &self.class_covariances {
            Some(rows) => rows
                .iter()
                .map(|m| {
                    let t = SpdMatrix::from_rows(m).map_err(|e| SignalError::InvalidSpec(format!("class template: {e}")))?;
                    if t.dim() != self.channels {
                        return Err(SignalError::InvalidSpec(format!(
                            "class template is {}x{}, expected {} channels",
                            t.dim(),
                            t.dim(),
                            self.channels
                        )));
                    }
                    Ok(t)
                })
                .collect(),
            None => Ok(default_class_templates(
                self.channels,
                self.classes.len(),
                self.template_separation,
                self.seed,
            )),
        }
    }

    /// Patient ground truth in class order.
    pub fn patients(&self) -> Result<Vec<PatientPlan>, SignalError> {
        self.validate()?;
        let templates = self.templates()?;
        let mut out = Vec::with_capacity(self.total_patients());
        for (k, (class, template)) in self.classes.iter().zip(&templates).enumerate() {
            let base = BasePoint::new(template.clone());
            let modes = variation_modes(self.channels, self.variation_rank, self.seed, if self.shared_variation { 0 } else { k + 1 });
            for p in 0..class.patients {
                let index = out.len();
                let mut rng = stream_rng(self.seed, index as u64);
                let recordings = self.draw_recording_count(&mut rng);
                let mut tangent = random_unit_symmetric(self.channels, &mut rng) * self.within_class_dispersion;
                for mode in &modes {
                    let z: f64 = rng.sample(StandardNormal);
                    tangent.scaled_add(self.variation_scale * z, mode);
                }
                let covariance = base.whitened_exp(&tangent)?;
                out.push(PatientPlan {
                    index,
                    patient_id: format!("{}-{:03}", class.name, p),
                    label: ClassId::new(class.name.clone()),
                    covariance,
                    recordings,
                });
            }
        }
        Ok(out)
    }

    fn draw_recording_count(&self, rng: &mut ChaCha8Rng) -> usize {
        let r = &self.recordings_per_patient;
        let extra = r.mean - r.min as f64;
        let draw = if extra > 0.0 {
            Poisson::new(extra).map(|d| d.sample(rng) as usize).unwrap_or(0)
        } else {
            0
        };
        (r.min + draw).min(r.max)
    }
}

/// Recordings of every patient, grouped by patient in class order.
pub fn generate_cohort(spec: &CohortSpec) -> Result<Vec<MultiChannelRecording<f64>>, SignalError> {
    let plans = spec.patients()?;
    let per_patient: Result<Vec<Vec<MultiChannelRecording<f64>>>, SignalError> =
        plans.par_iter().map(|plan| patient_recordings(spec, plan)).collect();
    Ok(per_patient?.into_iter().flatten().collect())
}

/// Recordings for one patient; the random stream is private to the patient.
pub fn patient_recordings(
    spec: &CohortSpec,
    plan: &PatientPlan,
) -> Result<Vec<MultiChannelRecording<f64>>, SignalError> {
    // stream offset keeps recording draws disjoint from the plan draws
    let mut rng = stream_rng(spec.seed, (1u64 << 32) + plan.index as u64);
    let c = spec.channels;
    let len = spec.samples_per_recording;
    let chol = cholesky(plan.covariance.data().view()).expect("patient covariance is SPD");
    let ref_sd = plan.covariance.data()[[spec.reference_channel, spec.reference_channel]].sqrt();
    let lo = (len as f64 * 0.42).ceil() as usize;
    let hi = ((len as f64 * 0.58).floor() as usize).max(lo);
    let mut out = Vec::with_capacity(plan.recordings);
    for _ in 0..plan.recordings {
        let gain = if spec.gain_log_std > 0.0 {
            (spec.gain_log_std * rng.sample::<f64, _>(StandardNormal)).exp()
        } else {
            1.0
        };
        let z = Array2::from_shape_fn((c, len), |_| rng.sample::<f64, _>(StandardNormal));
        let mut x = chol.dot(&z);
        if gain != 1.0 {
            x.mapv_inplace(|v| v * gain);
        }
        if spec.noise_scale > 0.0 {
            x.mapv_inplace(|v| v + spec.noise_scale * rng.sample::<f64, _>(StandardNormal));
        }
        if spec.peak_amplitude > 0.0 {
            let at = rng.random_range(lo..=hi.min(len - 1));
            x[[spec.reference_channel, at]] += spec.peak_amplitude * ref_sd * gain;
        }
        out.push(MultiChannelRecording::new(plan.patient_id.clone(), plan.label.clone(), x, spec.sample_rate_hz)?);
    }
    Ok(out)
}

/// `rank` orthonormal symmetric matrices; `set` selects an independent draw.
fn variation_modes(n: usize, rank: usize, seed: u64, set: usize) -> Vec<Array2<f64>> {
    let mut rng = stream_rng(seed ^ 0x51ab_c0de_0dd5_0002, set as u64);
    let mut modes: Vec<Array2<f64>> = Vec::with_capacity(rank);
    while modes.len() < rank.min(n * (n + 1) / 2) {
        let mut m = random_unit_symmetric(n, &mut rng);
        for prev in &modes {
            let proj = (&m * prev).sum();
            m.scaled_add(-proj, prev);
        }
        let norm = m.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            modes.push(m / norm);
        }
    }
    modes
}

/// Symmetric matrix with standard normal entries, scaled to unit Frobenius norm.
fn random_unit_symmetric(n: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let g = Array2::from_shape_fn((n, n), |_| rng.sample::<f64, _>(StandardNormal));
    let s = (&g + &g.t()) * 0.5;
    let norm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
    s / norm
}

/// `k` well-conditioned templates placed at distance `separation` from a common
/// centre along mutually orthogonal tangent directions, so every pair is
/// `√2 · separation` apart in the centre's tangent space.
pub fn default_class_templates(channels: usize, k: usize, separation: f64, seed: u64) -> Vec<SpdMatrix<f64>> {
    let mut rng = stream_rng(seed ^ 0x7e3a_11c0_5eed_0001, 0);
    let g = random_unit_symmetric(channels, &mut rng);
    let q = symmetric_eigen(g.view()).expect("eigendecomposition of random symmetric matrix").vectors;
    let spectrum: Array1<f64> = if channels == 1 {
        Array1::from_elem(1, 1.0)
    } else {
        Array1::from_iter((0..channels).map(|i| 2f64.powf(1.0 - 2.0 * i as f64 / (channels - 1) as f64)))
    };
    let centre = SpdMatrix::new(q.dot(&Array2::from_diag(&spectrum)).dot(&q.t())).expect("centre is SPD");
    let base = BasePoint::new(centre);

    let mut directions: Vec<Array1<f64>> = Vec::with_capacity(k);
    while directions.len() < k {
        let mut v = pack_upper(&random_unit_symmetric(channels, &mut rng));
        for d in &directions {
            let proj = v.dot(d);
            v.scaled_add(-proj, d);
        }
        let norm = v.dot(&v).sqrt();
        if norm > 1e-8 {
            directions.push(v / norm);
        } else if directions.len() >= channels * (channels + 1) / 2 {
            // more classes than tangent dimensions; reuse directions
            let d = directions[directions.len() % (channels * (channels + 1) / 2)].clone();
            directions.push(d);
        }
    }
    directions
        .iter()
        .map(|d| {
            let s = unpack_upper(&(d * separation), channels).expect("packed length");
            base.whitened_exp(&s).expect("template is SPD")
        })
        .collect()
}
