//! Seeded Monte Carlo sweeps over one scenario parameter.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamforming::{
    check_balance, zf_digital_precoder, Association, BeamformerSet, ChannelScope, DigitalPrecoder,
    EquivalentChannel, Side,
};
use crate::channel::{
    collocated_channel, draw_system_channels, ArrayGeometry, PathLoss, UserAoaMode,
};
use crate::error::{Error, Result};
use crate::estimation::{
    beam_sweep, beamformers_from_reports, dft_codebook, estimate_stacked_channel, orthogonal_pilots,
};
use crate::rate::{
    db_to_linear, dbm_to_mw, rate_bs_closed_form, rate_gap, rate_sbs_closed_form, sumrate_mc,
    svd_digital_precoder_from, PowerBudget, Scheme, TrialSystem,
};
use crate::rng::SimRng;
use crate::ClusterModel;

/// Environment variable overriding the number of worker threads.
pub const WORKERS_ENV: &str = "SMALLCELL_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecoderKind {
    SvdPerUser,
    ZfStacked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsiMode {
    Genie,
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    DistributedHybrid,
    CollocatedDigital,
    /// Large-array closed forms of both schemes.
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub k_users: usize,
    pub n_sbs: usize,
    pub n_r: usize,
    pub n_d: usize,
    pub m_sbs: usize,
    pub m_bs: usize,
    pub p_user: usize,
    pub n_cl: usize,
    pub power_ratio: f64,
    pub p_t_dbm: f64,
    pub noise_var_dbm: f64,
    /// ϖ for every link, in dB.
    pub path_loss_db: f64,
    /// Element spacing over wavelength, all arrays.
    pub spacing_ratio: f64,
    pub user_aoa: UserAoaMode,
    pub trials: usize,
    pub master_seed: u64,
    pub precoder: PrecoderKind,
    pub csi: CsiMode,
    pub schemes: Vec<SchemeName>,
    /// DFT codebook oversampling for beam sweeping (estimated CSI).
    pub codebook_oversampling: usize,
    /// Per-chain pilot and sweep reference energy; the per-stream data
    /// energy when absent.
    pub pilot_energy_dbm: Option<f64>,
}

pub const DEFAULT_NOISE_DBM: f64 = -74.0;

/// Link path loss for the default scenario. With P_t = 10 dBm, K = 2,
/// M = 50, P = 6 and the default noise floor it gives
/// SNR_k = ϖ·E_BS,k·M·P/σ² ≈ 25 dB, where the distributed scheme leads at
/// P_t = 10 dBm and the collocated array overtakes it about 15 dB higher.
pub const DEFAULT_PATH_LOSS_DB: f64 = -80.76;

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            k_users: 2,
            n_sbs: 3,
            n_r: 2,
            n_d: 3,
            m_sbs: 50,
            m_bs: 150,
            p_user: 6,
            n_cl: 4,
            power_ratio: 5.0,
            p_t_dbm: 10.0,
            noise_var_dbm: DEFAULT_NOISE_DBM,
            path_loss_db: DEFAULT_PATH_LOSS_DB,
            spacing_ratio: ArrayGeometry::DEFAULT_SPACING,
            user_aoa: UserAoaMode::PerCluster,
            trials: 2000,
            master_seed: 1,
            precoder: PrecoderKind::SvdPerUser,
            csi: CsiMode::Genie,
            schemes: vec![SchemeName::DistributedHybrid, SchemeName::CollocatedDigital],
            codebook_oversampling: 2,
            pilot_energy_dbm: None,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("k_users", self.k_users),
            ("n_sbs", self.n_sbs),
            ("n_r", self.n_r),
            ("n_d", self.n_d),
            ("m_sbs", self.m_sbs),
            ("m_bs", self.m_bs),
            ("p_user", self.p_user),
            ("n_cl", self.n_cl),
            ("trials", self.trials),
            ("codebook_oversampling", self.codebook_oversampling),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        check_balance(self.n_sbs, self.n_r, self.k_users, self.n_d)
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.n_d > self.n_sbs {
            return Err(Error::Config(format!(
                "n_d = {} exceeds n_sbs = {}: a user takes at most one stream per SBS",
                self.n_d, self.n_sbs
            )));
        }
        if self.n_r > self.k_users {
            return Err(Error::Config(format!(
                "n_r = {} exceeds k_users = {}: an SBS sends at most one stream per user",
                self.n_r, self.k_users
            )));
        }
        if self.p_user < self.n_d {
            return Err(Error::Config(format!(
                "p_user = {} is below n_d = {}: each user RF chain needs its own antenna dimension",
                self.p_user, self.n_d
            )));
        }
        if !(self.power_ratio > 0.0) || !self.power_ratio.is_finite() {
            return Err(Error::Config(format!(
                "power_ratio = {} must be positive",
                self.power_ratio
            )));
        }
        if self.n_cl > 1 && self.power_ratio < 1.0 / (self.n_cl - 1) as f64 {
            return Err(Error::Config(format!(
                "power_ratio = {} cannot keep the strongest cluster strongest with n_cl = {}",
                self.power_ratio, self.n_cl
            )));
        }
        if !(self.spacing_ratio > 0.0) || !self.spacing_ratio.is_finite() {
            return Err(Error::Config(format!(
                "spacing_ratio = {} must be positive",
                self.spacing_ratio
            )));
        }
        for (name, v) in [
            ("p_t_dbm", self.p_t_dbm),
            ("noise_var_dbm", self.noise_var_dbm),
            ("path_loss_db", self.path_loss_db),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        if self.pilot_energy_dbm.is_some_and(|v| !v.is_finite()) {
            return Err(Error::Config("pilot_energy_dbm must be finite".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("schemes must not be empty".into()));
        }
        Ok(())
    }

    pub fn noise_var(&self) -> f64 {
        dbm_to_mw(self.noise_var_dbm)
    }

    pub fn path_loss(&self) -> f64 {
        db_to_linear(self.path_loss_db)
    }

    pub fn budget(&self) -> Result<PowerBudget> {
        PowerBudget::from_dbm(self.p_t_dbm, self.k_users, self.n_sbs)
    }

    /// `SNR_k = ϖ·E_BS,k·M·P/σ²`.
    pub fn snr_per_user(&self) -> f64 {
        self.path_loss() * dbm_to_mw(self.p_t_dbm) / self.k_users as f64
            * (self.m_sbs * self.p_user) as f64
            / self.noise_var()
    }

    pub fn cluster_model(&self) -> ClusterModel {
        ClusterModel {
            n_cl: self.n_cl,
            power_ratio: self.power_ratio,
            user_aoa: self.user_aoa,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    NSbs,
    PtDbm,
    PowerRatio,
    NCl,
    PUser,
}

impl SweepParam {
    pub const ALL: [SweepParam; 5] = [
        SweepParam::NSbs,
        SweepParam::PtDbm,
        SweepParam::PowerRatio,
        SweepParam::NCl,
        SweepParam::PUser,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::NSbs => "n_sbs",
            SweepParam::PtDbm => "p_t_dbm",
            SweepParam::PowerRatio => "power_ratio",
            SweepParam::NCl => "n_cl",
            SweepParam::PUser => "p_user",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Config at one sweep point. Sweeping `n_sbs` keeps `n_r`, `k_users`
    /// and the per-SBS array size, and re-derives `n_d = n_sbs·n_r/k_users`
    /// and `m_bs = n_sbs·m_sbs`.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut cfg = base.clone();
        let count = || -> Result<usize> {
            if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!(
                    "{} needs a non-negative integer, got {value}",
                    self.name()
                )))
            }
        };
        match self {
            SweepParam::NSbs => {
                let n = count()?;
                cfg.n_sbs = n;
                cfg.m_bs = n * base.m_sbs;
                if !(n * base.n_r).is_multiple_of(base.k_users) {
                    return Err(Error::Config(format!(
                        "RF-chain balance N·N_R = K·N_D has no integer N_D for N = {n}"
                    )));
                }
                cfg.n_d = n * base.n_r / base.k_users;
            }
            SweepParam::PtDbm => cfg.p_t_dbm = value,
            SweepParam::PowerRatio => cfg.power_ratio = value,
            SweepParam::NCl => cfg.n_cl = count()?,
            SweepParam::PUser => cfg.p_user = count()?,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesStat {
    pub scheme: String,
    pub mean: f64,
    pub ci95: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub sweep_value: f64,
    pub series: Vec<SeriesStat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedPoint {
    pub sweep_value: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    pub sweep_name: String,
    pub points: Vec<CurvePoint>,
    pub rejected: Vec<RejectedPoint>,
}

impl CurveSet {
    /// Mean rates of one scheme over the accepted points, in sweep order.
    pub fn series(&self, scheme: &str) -> Vec<(f64, SeriesStat)> {
        self.points
            .iter()
            .filter_map(|p| {
                p.series
                    .iter()
                    .find(|s| s.scheme == scheme)
                    .map(|s| (p.sweep_value, s.clone()))
            })
            .collect()
    }
}

/// Mean and 95% normal-approximation half-width `1.96·s/√n`.
pub fn mean_ci(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}

/// Builds the distributed system, its beamformers and the collocated
/// benchmark for one trial. Every random draw comes from `rng` in a fixed
/// order.
pub fn draw_trial(cfg: &ScenarioConfig, rng: &mut SimRng) -> Result<TrialSystem> {
    let model = cfg.cluster_model();
    let sbs_geom = ArrayGeometry::new(cfg.m_sbs, cfg.spacing_ratio)?;
    let bs_geom = ArrayGeometry::new(cfg.m_bs, cfg.spacing_ratio)?;
    let user_geom = ArrayGeometry::new(cfg.p_user, cfg.spacing_ratio)?;
    let loss = cfg.path_loss();
    let distributed = draw_system_channels(
        rng,
        cfg.n_sbs,
        cfg.k_users,
        sbs_geom,
        user_geom,
        &model,
        &PathLoss::Uniform(loss),
    )?;
    let collocated = (0..cfg.k_users)
        .map(|_| collocated_channel(rng, bs_geom, user_geom, &model, loss))
        .collect::<Result<Vec<_>>>()?;

    let noise_var = cfg.noise_var();
    let budget = cfg.budget()?;
    let stream_energy = budget.per_user_energy() / cfg.n_d as f64;
    let beams = match cfg.csi {
        CsiMode::Genie => {
            let association = if cfg.n_d == cfg.n_sbs && cfg.n_r == cfg.k_users {
                Association::full(cfg.n_sbs, cfg.k_users)
            } else {
                Association::strongest_links(cfg.n_sbs, cfg.k_users, cfg.n_r, cfg.n_d, |i, k| {
                    let link = distributed.get(i, k);
                    link.path_loss * link.path_set.strongest().gain.norm_sqr()
                })?
            };
            let mut beams = BeamformerSet::strongest_path(&distributed, association)?;
            if cfg.precoder == PrecoderKind::ZfStacked {
                let h = beams.downlink_effective_channel(&distributed)?;
                beams.digital = Some(DigitalPrecoder::StackedZf(zf_digital_precoder(
                    &EquivalentChannel {
                        matrix: h,
                        scope: ChannelScope::SystemStacked,
                    },
                )?));
            }
            beams
        }
        CsiMode::Estimated => {
            let reference = cfg.pilot_energy_dbm.map_or(stream_energy, dbm_to_mw);
            let sbs_cb = dft_codebook(&sbs_geom, cfg.codebook_oversampling, Side::Sbs)?;
            let user_cb = dft_codebook(&user_geom, cfg.codebook_oversampling, Side::User)?;
            let reports = beam_sweep(
                &distributed,
                &sbs_cb,
                &user_cb,
                cfg.n_r,
                cfg.n_d,
                reference,
                noise_var,
                rng,
            )?;
            let mut beams =
                beamformers_from_reports(&reports, &sbs_cb, &user_cb, cfg.n_sbs, cfg.n_r)?;
            let (up_sbs, up_user) = beams.uplink_weights();
            let pilots = orthogonal_pilots(cfg.k_users * cfg.n_d)?;
            let estimate = estimate_stacked_channel(
                &distributed,
                &up_sbs,
                &up_user,
                &pilots,
                reference,
                noise_var,
                rng,
            )?;
            let h_dl = estimate.matrix.transpose();
            beams.digital = Some(match cfg.precoder {
                PrecoderKind::SvdPerUser => svd_digital_precoder_from(&h_dl, &beams)?,
                PrecoderKind::ZfStacked => {
                    DigitalPrecoder::StackedZf(zf_digital_precoder(&EquivalentChannel {
                        matrix: h_dl,
                        scope: ChannelScope::SystemStacked,
                    })?)
                }
            });
            beams
        }
    };
    Ok(TrialSystem {
        distributed,
        beams,
        collocated,
    })
}

/// Rates of the Monte Carlo schemes in `cfg.schemes` order.
fn trial_rates(cfg: &ScenarioConfig, sweep_key: u64, trial_index: u64) -> Result<Vec<f64>> {
    let mut rng = SimRng::for_trial(cfg.master_seed, sweep_key, trial_index);
    let system = draw_trial(cfg, &mut rng)?;
    let budget = cfg.budget()?;
    let noise = cfg.noise_var();
    cfg.schemes
        .iter()
        .filter_map(|s| match s {
            SchemeName::DistributedHybrid => Some(Scheme::DistributedHybrid),
            SchemeName::CollocatedDigital => Some(Scheme::CollocatedDigital),
            SchemeName::ClosedForm => None,
        })
        .map(|s| sumrate_mc(&system, s, &budget, noise))
        .collect()
}

fn scheme_label(s: SchemeName) -> &'static str {
    match s {
        SchemeName::DistributedHybrid => "distributed_hybrid",
        SchemeName::CollocatedDigital => "collocated_digital",
        SchemeName::ClosedForm => "closed_form",
    }
}

/// Closed forms at equal power: every link with ϖ, `E_s = P_t/(K·N)` per
/// SBS stream, collocated array of `N·M_SBS` antennas.
fn closed_form_series(cfg: &ScenarioConfig) -> Result<Vec<SeriesStat>> {
    let budget = cfg.budget()?;
    let loss = cfg.path_loss();
    let noise = cfg.noise_var();
    let per_link = vec![vec![loss; cfg.n_sbs]; cfg.k_users];
    let energies = vec![vec![budget.per_sbs_stream_energy(); cfg.n_sbs]; cfg.k_users];
    let sbs = rate_sbs_closed_form(cfg.m_sbs, cfg.p_user, &per_link, &energies, noise)?;
    let bs = rate_bs_closed_form(
        cfg.n_sbs,
        cfg.m_sbs,
        cfg.p_user,
        &vec![loss; cfg.k_users],
        &vec![budget.per_user_energy(); cfg.k_users],
        noise,
    )?;
    let gap = rate_gap(cfg.n_sbs, &vec![cfg.snr_per_user(); cfg.k_users])?;
    let stat = |name: &str, v: f64| SeriesStat {
        scheme: name.into(),
        mean: v,
        ci95: 0.0,
        trials: 1,
    };
    Ok(vec![
        stat("closed_form_distributed", sbs),
        stat("closed_form_collocated", bs),
        stat("closed_form_gap", gap.exact),
    ])
}

/// Worker count from [`WORKERS_ENV`], if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n| n > 0)
}

/// Runs the sweep on a pool sized by [`WORKERS_ENV`] (rayon's default when
/// unset).
pub fn run_sweep(config: &ScenarioConfig, sweep: SweepParam, values: &[f64]) -> Result<CurveSet> {
    run_sweep_with_workers(config, sweep, values, workers_from_env())
}

/// Invalid sweep points are reported in `rejected`; numerical failures abort
/// the sweep. Results do not depend on `workers`. Each point draws from
/// streams keyed by its value, so adding, removing or reordering other points
/// leaves it unchanged.
pub fn run_sweep_with_workers(
    config: &ScenarioConfig,
    sweep: SweepParam,
    values: &[f64],
    workers: Option<usize>,
) -> Result<CurveSet> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;

    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);

    let mut points = Vec::new();
    let mut rejected = Vec::new();
    for value in sorted {
        let cfg = match sweep.apply(config, value) {
            Ok(c) => c,
            Err(e) => {
                rejected.push(RejectedPoint {
                    sweep_value: value,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let mc: Vec<SchemeName> = cfg
            .schemes
            .iter()
            .copied()
            .filter(|s| *s != SchemeName::ClosedForm)
            .collect();
        let mut series = Vec::new();
        if !mc.is_empty() {
            let per_trial: Vec<Vec<f64>> = pool.install(|| {
                (0..cfg.trials as u64)
                    .into_par_iter()
                    .map(|t| trial_rates(&cfg, value.to_bits(), t))
                    .collect::<Result<Vec<_>>>()
            })?;
            for (j, scheme) in mc.iter().enumerate() {
                let samples: Vec<f64> = per_trial.iter().map(|r| r[j]).collect();
                let (mean, ci95) = mean_ci(&samples);
                series.push(SeriesStat {
                    scheme: scheme_label(*scheme).into(),
                    mean,
                    ci95,
                    trials: cfg.trials,
                });
            }
        }
        if cfg.schemes.contains(&SchemeName::ClosedForm) {
            series.extend(closed_form_series(&cfg)?);
        }
        points.push(CurvePoint {
            sweep_value: value,
            series,
        });
    }
    Ok(CurveSet {
        sweep_name: sweep.name().into(),
        points,
        rejected,
    })
}

/// Exact and high-SNR rate gain versus the number of SBSs at a common
/// per-user SNR.
pub fn rate_gap_curve(k_users: usize, snr_db: f64, n_values: &[usize]) -> Result<CurveSet> {
    if k_users == 0 {
        return Err(Error::InvalidParameter("k_users must be at least 1".into()));
    }
    let snr = db_to_linear(snr_db);
    let mut ns = n_values.to_vec();
    ns.sort_unstable();
    let points = ns
        .into_iter()
        .map(|n| {
            let g = rate_gap(n, &vec![snr; k_users])?;
            let stat = |name: &str, v: f64| SeriesStat {
                scheme: name.into(),
                mean: v,
                ci95: 0.0,
                trials: 1,
            };
            Ok(CurvePoint {
                sweep_value: n as f64,
                series: vec![
                    stat("exact", g.exact),
                    stat("high_snr_approx", g.high_snr_approx),
                ],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CurveSet {
        sweep_name: "n_sbs".into(),
        points,
        rejected: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let cfg = ScenarioConfig::default();
        cfg.validate().unwrap();
        let snr_db = 10.0 * cfg.snr_per_user().log10();
        assert!((snr_db - 25.0).abs() < 0.01, "{snr_db}");
    }

    #[test]
    fn validation_names_the_constraint() {
        let cfg = ScenarioConfig {
            n_d: 2,
            ..ScenarioConfig::default()
        };
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("N·N_R = K·N_D"), "{msg}");
        let cfg = ScenarioConfig {
            trials: 0,
            ..ScenarioConfig::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("trials"));
    }

    #[test]
    fn mean_ci_matches_formula() {
        let (m, ci) = mean_ci(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        let s = (5.0f64 / 3.0).sqrt();
        assert!((ci - 1.96 * s / 2.0).abs() < 1e-15);
        assert_eq!(mean_ci(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn n_sbs_sweep_rederives_dependent_counts() {
        let base = ScenarioConfig::default();
        let cfg = SweepParam::NSbs.apply(&base, 4.0).unwrap();
        assert_eq!((cfg.n_sbs, cfg.n_d, cfg.m_bs), (4, 4, 200));
        assert!(SweepParam::NSbs.apply(&base, 7.0).is_err());
        assert!(SweepParam::NCl.apply(&base, 2.5).is_err());
    }

    #[test]
    fn rate_gap_curve_examples() {
        let c = rate_gap_curve(1, 30.0, &[1, 2]).unwrap();
        assert_eq!(c.points[0].series[0].mean, 0.0);
        assert!((c.points[1].series[0].mean - 6.971).abs() < 1e-3);
    }
}
