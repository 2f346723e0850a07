//! Sum-rate evaluators, all in bits/s/Hz.
//!
//! * large-array closed forms for the collocated and distributed pure-LOS
//!   systems and their gap,
//! * the per-stream SINR decomposition of the analog-only distributed
//!   downlink (desired, scattering, co-channel, inter-user, noise), computed
//!   both from channel matrices and from path parameters,
//! * the MMSE-SIC log-det objective for a user combiner,
//! * exact Monte Carlo rates of the distributed hybrid and collocated fully
//!   digital schemes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::beamforming::{
    svd_digital_precoder, transpose_mul, BeamformerSet, ChannelScope, DigitalPrecoder,
    EquivalentChannel,
};
use crate::channel::{ChannelRealization, SystemChannels};
use crate::error::{Error, Result};
use crate::numerics::{
    dot_h, log2_det_hpd, log_det_capacity, svd, water_filling, ComplexMatrix, C64,
};

/// Total transmit power split equally over users, then over SBSs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    /// Linear, milliwatts.
    pub total_power: f64,
    pub k_users: usize,
    pub n_sbs: usize,
}

impl PowerBudget {
    pub fn new(total_power: f64, k_users: usize, n_sbs: usize) -> Result<Self> {
        if !(total_power >= 0.0) || !total_power.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "total power {total_power}"
            )));
        }
        if k_users == 0 || n_sbs == 0 {
            return Err(Error::InvalidParameter(
                "power budget needs users and SBSs".into(),
            ));
        }
        Ok(Self {
            total_power,
            k_users,
            n_sbs,
        })
    }

    pub fn from_dbm(dbm: f64, k_users: usize, n_sbs: usize) -> Result<Self> {
        Self::new(dbm_to_mw(dbm), k_users, n_sbs)
    }

    /// `E_BS,k = P_t / K`.
    pub fn per_user_energy(&self) -> f64 {
        self.total_power / self.k_users as f64
    }

    /// `E_s,i,k = P_t / (K·N)`.
    pub fn per_sbs_stream_energy(&self) -> f64 {
        self.per_user_energy() / self.n_sbs as f64
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn check_noise(noise_var: f64) -> Result<()> {
    if !(noise_var > 0.0) || !noise_var.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise variance {noise_var}"
        )));
    }
    Ok(())
}

/// `Σ_k log₂(1 + ϖ_k·N·M·P·E_BS,k/σ²)`.
pub fn rate_bs_closed_form(
    n_sbs: usize,
    m: usize,
    p: usize,
    path_loss: &[f64],
    energies: &[f64],
    noise_var: f64,
) -> Result<f64> {
    check_noise(noise_var)?;
    if path_loss.len() != energies.len() {
        return Err(Error::Dimension("path loss and energy per user".into()));
    }
    let nmp = (n_sbs * m * p) as f64;
    Ok(path_loss
        .iter()
        .zip(energies)
        .map(|(w, e)| (w * nmp * e / noise_var).log2_1p())
        .sum())
}

/// `Σ_k Σ_i log₂(1 + ϖ_{i,k}·M·P·E_s,i,k/σ²)`; both tables are indexed
/// `[user][sbs]`.
pub fn rate_sbs_closed_form(
    m: usize,
    p: usize,
    path_loss: &[Vec<f64>],
    energies: &[Vec<f64>],
    noise_var: f64,
) -> Result<f64> {
    check_noise(noise_var)?;
    if path_loss.len() != energies.len()
        || path_loss
            .iter()
            .zip(energies)
            .any(|(a, b)| a.len() != b.len())
    {
        return Err(Error::Dimension("path loss and energy per link".into()));
    }
    let mp = (m * p) as f64;
    Ok(path_loss
        .iter()
        .zip(energies)
        .flat_map(|(w, e)| w.iter().zip(e))
        .map(|(w, e)| (w * mp * e / noise_var).log2_1p())
        .sum())
}

trait Log2OnePlus {
    fn log2_1p(self) -> f64;
}

impl Log2OnePlus for f64 {
    fn log2_1p(self) -> f64 {
        self.ln_1p() / std::f64::consts::LN_2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateGap {
    pub exact: f64,
    pub high_snr_approx: f64,
}

/// Distributed-minus-collocated rate gain for per-user SNRs
/// `SNR_k = ϖ·E_BS,k·M·P/σ²`.
pub fn rate_gap(n_sbs: usize, snr_per_user: &[f64]) -> Result<RateGap> {
    if n_sbs == 0 {
        return Err(Error::InvalidParameter("n_sbs must be at least 1".into()));
    }
    if let Some(s) = snr_per_user.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "SNR must be positive, got {s}"
        )));
    }
    let n = n_sbs as f64;
    let k = snr_per_user.len() as f64;
    let exact = snr_per_user
        .iter()
        .map(|&s| n * (s / n).log2_1p() - (n * s).log2_1p())
        .sum();
    let high_snr_approx = snr_per_user
        .iter()
        .map(|&s| (n - 1.0) * (s / n).log2_1p())
        .sum::<f64>()
        - 2.0 * k * n.log2();
    Ok(RateGap {
        exact,
        high_snr_approx,
    })
}

/// Per-stream transmit energies `E_{j,t}` of the stream SBS `j` sends to user `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamEnergies {
    n_users: usize,
    values: Vec<f64>,
}

impl StreamEnergies {
    pub fn uniform(n_sbs: usize, n_users: usize, energy: f64) -> Self {
        Self {
            n_users,
            values: vec![energy; n_sbs * n_users],
        }
    }

    pub fn from_fn(n_sbs: usize, n_users: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        Self {
            n_users,
            values: (0..n_sbs)
                .flat_map(|j| (0..n_users).map(move |t| (j, t)))
                .map(|(j, t)| f(j, t))
                .collect(),
        }
    }

    pub fn get(&self, sbs: usize, user: usize) -> f64 {
        self.values[sbs * self.n_users + user]
    }
}

/// Received powers on one user RF chain, split by origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinrBreakdown {
    pub desired: f64,
    pub scattering: f64,
    pub co_channel: f64,
    pub inter_user: f64,
    pub noise: f64,
}

impl SinrBreakdown {
    pub fn sinr(&self) -> f64 {
        self.desired / (self.scattering + self.co_channel + self.inter_user + self.noise)
    }

    /// SINR with the scattering and inter-user terms dropped.
    pub fn sinr_upper_bound(&self) -> f64 {
        self.desired / (self.co_channel + self.noise)
    }

    pub fn rate(&self, mode: SinrMode) -> f64 {
        match mode {
            SinrMode::Full => self.sinr().log2_1p(),
            SinrMode::UpperBoundB => self.sinr_upper_bound().log2_1p(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinrMode {
    Full,
    /// Scattering and inter-user interference omitted.
    UpperBoundB,
}

/// Decomposes the signal on RF chain `chain` of `user` when every SBS sends
/// its streams through its analog beams without digital precoding. Terms are
/// computed from the strongest-cluster and scattered parts of the channel
/// matrices seen through the actual beam vectors.
pub fn sinr_breakdown(
    channels: &SystemChannels,
    beams: &BeamformerSet,
    user: usize,
    chain: usize,
    energies: &StreamEnergies,
    noise_var: f64,
) -> Result<SinrBreakdown> {
    check_noise(noise_var)?;
    let assoc = &beams.association;
    if user >= channels.n_users() || chain >= assoc.n_d() {
        return Err(Error::InvalidParameter(format!(
            "stream ({user}, {chain}) out of range"
        )));
    }
    let f = beams.users[user].column(chain);
    let target_sbs = assoc.serving(user)[chain];
    let gain = |h: &ComplexMatrix, beam: &[C64]| -> Result<f64> {
        Ok(dot_h(&f, &transpose_mul(h, beam)?).norm_sqr())
    };

    let mut out = SinrBreakdown {
        desired: 0.0,
        scattering: 0.0,
        co_channel: 0.0,
        inter_user: 0.0,
        noise: noise_var * crate::numerics::norm_sqr(&f),
    };
    for &j in assoc.serving(user) {
        let link = channels.get(j, user);
        let beam = beams.sbs_beam(j, user).expect("serving SBS beam");
        let e = energies.get(j, user);
        let los = gain(&link.strongest_component(), &beam)? * e;
        if j == target_sbs {
            out.desired = los;
        } else {
            out.co_channel += los;
        }
        out.scattering += gain(&link.scattered_component(), &beam)? * e;
    }
    for j in 0..channels.n_sbs() {
        let h = &channels.get(j, user).matrix;
        for &t in assoc.served(j) {
            if t == user {
                continue;
            }
            let beam = beams.sbs_beam(j, t).expect("served user beam");
            out.inter_user += gain(h, &beam)? * energies.get(j, t);
        }
    }
    Ok(out)
}

/// `Σ_k Σ_i log₂(1 + SINR_{k,i})` over every user stream.
pub fn sumrate_sinr(
    channels: &SystemChannels,
    beams: &BeamformerSet,
    energies: &StreamEnergies,
    noise_var: f64,
    mode: SinrMode,
) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..channels.n_users() {
        for i in 0..beams.association.n_d() {
            total += sinr_breakdown(channels, beams, k, i, energies, noise_var)?.rate(mode);
        }
    }
    Ok(total)
}

/// `Σ_{m<n} e^{j·m·x}` in closed form.
fn array_factor(n: usize, x: f64) -> C64 {
    let half = 0.5 * x;
    let s = half.sin();
    if s.abs() < 1e-6 {
        return (0..n).map(|m| C64::from_polar(1.0, m as f64 * x)).sum();
    }
    let mag = (n as f64 * half).sin() / s;
    C64::from_polar(1.0, (n as f64 - 1.0) * half) * mag
}

/// Per-stream decomposition evaluated in the path domain: SBS beams on the
/// strongest cluster, user beams on the strongest user-side path, and all
/// inner products as array factors of direction-cosine differences. The
/// desired and co-channel terms take the closed forms
/// `ς/(ς+1)·ϖ·M·P·E` and `(M/P)·ϖ·ς/(ς+1)·|h_iᵀh_j*|²·E`.
pub fn sinr_breakdown_path_domain(
    channels: &SystemChannels,
    beams: &BeamformerSet,
    user: usize,
    chain: usize,
    energies: &StreamEnergies,
    noise_var: f64,
) -> Result<SinrBreakdown> {
    check_noise(noise_var)?;
    let assoc = &beams.association;
    let m = channels.sbs_antennas();
    let p = channels.user_antennas();
    let sbs_d = channels.get(0, 0).sbs_geom.spacing_ratio();
    let user_d = channels.get(0, 0).user_geom.spacing_ratio();
    // Phase slope x(ψ) with a(ψ)[m] = e^{j·m·x(ψ)}.
    let sbs_x = |angle: f64| -2.0 * PI * sbs_d * angle.cos();
    let user_x = |angle: f64| -2.0 * PI * user_d * angle.cos();

    let target_sbs = assoc.serving(user)[chain];
    let combiner_x = user_x(channels.get(target_sbs, user).path_set.strongest().aoa_user);
    let (mf, pf) = (m as f64, p as f64);

    // f̂ᴴ·H_{j,k}ᵀ·f_{SBS,j,t} restricted to clusters `range`.
    let amplitude = |j: usize, t: usize, range: std::ops::Range<usize>| -> C64 {
        let link = channels.get(j, user);
        let beam_x = sbs_x(channels.get(j, t).path_set.strongest().aoa_sbs);
        let paths = &link.path_set.paths()[range];
        let scale = (link.path_loss / link.path_set.n_cl() as f64).sqrt() / (mf * pf).sqrt();
        paths
            .iter()
            .map(|path| {
                path.gain
                    * array_factor(p, combiner_x - user_x(path.aoa_user))
                    * array_factor(m, sbs_x(path.aoa_sbs) - beam_x)
            })
            .sum::<C64>()
            * scale
    };

    let mut out = SinrBreakdown {
        desired: 0.0,
        scattering: 0.0,
        co_channel: 0.0,
        inter_user: 0.0,
        noise: noise_var,
    };
    for &j in assoc.serving(user) {
        let link = channels.get(j, user);
        let frac = link.path_set.strongest_power_fraction();
        let e = energies.get(j, user);
        if j == target_sbs {
            out.desired = frac * link.path_loss * mf * pf * e;
        } else {
            let cross = array_factor(p, combiner_x - user_x(link.path_set.strongest().aoa_user));
            out.co_channel += (mf / pf) * link.path_loss * frac * cross.norm_sqr() * e;
        }
        let n_cl = link.path_set.n_cl();
        out.scattering += amplitude(j, user, 1..n_cl).norm_sqr() * e;
    }
    for j in 0..channels.n_sbs() {
        let n_cl = channels.get(j, user).path_set.n_cl();
        for &t in assoc.served(j) {
            if t != user {
                out.inter_user += amplitude(j, t, 0..n_cl).norm_sqr() * energies.get(j, t);
            }
        }
    }
    Ok(out)
}

/// Sum-rate from [`sinr_breakdown_path_domain`].
pub fn sumrate_sinr_path_domain(
    channels: &SystemChannels,
    beams: &BeamformerSet,
    energies: &StreamEnergies,
    noise_var: f64,
    mode: SinrMode,
) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..channels.n_users() {
        for i in 0..beams.association.n_d() {
            total +=
                sinr_breakdown_path_domain(channels, beams, k, i, energies, noise_var)?.rate(mode);
        }
    }
    Ok(total)
}

/// `log₂det[I + E_s,k/(N·σ²)·Fᴴ H̃ᵀ H̃* F]` where `h_eq_user` is `H̃ᵀ`
/// (P × streams) and `f_user` is the P × N_D combiner.
pub fn mmse_sic_rate(
    h_eq_user: &ComplexMatrix,
    f_user: &ComplexMatrix,
    symbol_energy: f64,
    n_sbs: usize,
    noise_var: f64,
) -> Result<f64> {
    if n_sbs == 0 {
        return Err(Error::InvalidParameter("n_sbs must be at least 1".into()));
    }
    let g = f_user.adjoint_matmul(h_eq_user)?;
    log_det_capacity(&g, symbol_energy / n_sbs as f64, noise_var)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    DistributedHybrid,
    CollocatedDigital,
}

/// Per-user SVD precoders computed from the true per-user equivalent
/// channels (columns: serving SBS beams).
pub fn genie_svd_precoders(
    channels: &SystemChannels,
    beams: &BeamformerSet,
) -> Result<DigitalPrecoder> {
    let n_d = beams.association.n_d();
    let ws = (0..channels.n_users())
        .map(|k| {
            let heq = beams.user_equivalent_channel(channels, k)?;
            svd_digital_precoder(&heq, n_d.min(heq.matrix.rows()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DigitalPrecoder::PerUserSvd(ws))
}

/// Per-user SVD precoders from the user blocks of a (possibly estimated)
/// downlink effective channel.
pub fn svd_digital_precoder_from(
    h_dl: &ComplexMatrix,
    beams: &BeamformerSet,
) -> Result<DigitalPrecoder> {
    let n_d = beams.association.n_d();
    let ws = (0..beams.association.n_users())
        .map(|k| svd_digital_precoder(&user_block(h_dl, beams, k), n_d))
        .collect::<Result<Vec<_>>>()?;
    Ok(DigitalPrecoder::PerUserSvd(ws))
}

/// Exact rate of the distributed hybrid downlink for the given analog beams
/// and digital precoder (genie per-user SVD when none is attached).
///
/// With per-user SVD precoding each user decodes its own streams jointly
/// (MMSE-SIC) behind its analog combiner and treats the other users'
/// streams as colored noise. With stacked zero-forcing every stream is
/// decoded on its own RF chain.
pub fn sumrate_distributed(
    channels: &SystemChannels,
    beams: &BeamformerSet,
    budget: &PowerBudget,
    noise_var: f64,
) -> Result<f64> {
    check_noise(noise_var)?;
    let owned;
    let precoder = match &beams.digital {
        Some(p) => p,
        None => {
            owned = genie_svd_precoders(channels, beams)?;
            &owned
        }
    };
    let h_dl = beams.downlink_effective_channel(channels)?;
    let assoc = &beams.association;
    let n_d = assoc.n_d();
    let n_r = assoc.n_r();
    let k_users = channels.n_users();
    let stream_energy = budget.per_user_energy() / n_d as f64;

    match precoder {
        DigitalPrecoder::StackedZf(w) => {
            let g = h_dl.matmul(w)?;
            let mut total = 0.0;
            for s in 0..g.rows() {
                let k = s / n_d;
                let f = beams.users[k].column(s % n_d);
                let desired = g[(s, s)].norm_sqr() * stream_energy;
                let leak: f64 = (0..g.cols())
                    .filter(|&c| c != s)
                    .map(|c| g[(s, c)].norm_sqr() * stream_energy)
                    .sum();
                let noise = noise_var * crate::numerics::norm_sqr(&f);
                total += (desired / (leak + noise)).log2_1p();
            }
            Ok(total)
        }
        DigitalPrecoder::PerUserSvd(ws) => {
            if ws.len() != k_users {
                return Err(Error::Dimension("one precoder per user".into()));
            }
            // Columns of the SBS-chain space used by user t, in its stream order.
            let chains_of = |t: usize| -> Vec<usize> {
                assoc
                    .serving(t)
                    .iter()
                    .map(|&j| j * n_r + assoc.sbs_chain(j, t).expect("served"))
                    .collect()
            };
            let mut total = 0.0;
            for k in 0..k_users {
                let fk = beams.users[k].matrix();
                let mut noise = fk.adjoint_matmul(fk)?.scale(noise_var);
                let mut signal = ComplexMatrix::zeros(n_d, n_d);
                for (t, w) in ws.iter().enumerate() {
                    let cols = chains_of(t);
                    let c = ComplexMatrix::from_fn(n_d, cols.len(), |d, e| {
                        h_dl[(k * n_d + d, cols[e])]
                    });
                    let cw = c.matmul(w)?;
                    let q = cw
                        .matmul(&cw.adjoint())?
                        .scale(budget.per_user_energy() / w.cols() as f64);
                    if t == k {
                        signal = q;
                    } else {
                        noise = noise.add(&q)?;
                    }
                }
                total += log2_det_ratio(&noise, &signal, noise_var)?;
            }
            Ok(total)
        }
    }
}

/// `log₂det(Q_n + Q_s) − log₂det(Q_n)`, clamped at zero. A singular `Q_n`
/// (repeated combiner columns) shares its null space with `Q_s`, so a tiny
/// diagonal load leaves the ratio unchanged.
fn log2_det_ratio(noise: &ComplexMatrix, signal: &ComplexMatrix, noise_var: f64) -> Result<f64> {
    let total = noise.add(signal)?;
    match (log2_det_hpd(&total), log2_det_hpd(noise)) {
        (Ok(a), Ok(b)) => Ok((a - b).max(0.0)),
        _ => {
            let load = ComplexMatrix::identity(noise.rows()).scale(noise_var * 1e-9);
            let a = log2_det_hpd(&total.add(&load)?)?;
            let b = log2_det_hpd(&noise.add(&load)?)?;
            Ok((a - b).max(0.0))
        }
    }
}

/// Exact rate of the collocated fully digital array: each user's power
/// `E_BS,k` is water-filled over the eigenmodes of its own channel (SVD
/// precoding), and other users' streams are colored noise at each receiver.
pub fn sumrate_collocated(
    channels: &[ChannelRealization],
    budget: &PowerBudget,
    noise_var: f64,
) -> Result<f64> {
    check_noise(noise_var)?;
    if channels.len() != budget.k_users {
        return Err(Error::Dimension(format!(
            "{} collocated channels for {} users",
            channels.len(),
            budget.k_users
        )));
    }
    let e = budget.per_user_energy();
    // Downlink y_k = H_kᵀ x.
    let downlink: Vec<ComplexMatrix> = channels.iter().map(|c| c.matrix.transpose()).collect();
    let precoders = downlink
        .iter()
        .map(|g| {
            let r = svd(g)?;
            let gains: Vec<f64> = r.singular_values.iter().map(|s| s * s).collect();
            let power = water_filling(&gains, e, noise_var)?;
            let d = power.iter().filter(|&&p| p > 0.0).count().max(1);
            let v = r.right_vectors.block(0, 0, g.cols(), d);
            Ok(ComplexMatrix::from_fn(g.cols(), d, |i, j| {
                v[(i, j)] * power[j].sqrt()
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    for (k, g) in downlink.iter().enumerate() {
        let p = g.rows();
        let mut noise = ComplexMatrix::identity(p).scale(noise_var);
        let mut signal = ComplexMatrix::zeros(p, p);
        for (t, w) in precoders.iter().enumerate() {
            let gw = g.matmul(w)?;
            let q = gw.matmul(&gw.adjoint())?;
            if t == k {
                signal = q;
            } else {
                noise = noise.add(&q)?;
            }
        }
        total += log2_det_ratio(&noise, &signal, noise_var)?;
    }
    Ok(total)
}

/// Log-det rate of user `k`'s stacked pure-distributed channel with SVD
/// precoding over its nonzero modes at energy `E_s` each:
/// `log₂det[I + H_SBS,k H_SBS,kᴴ·E_s/σ²]` with `H_SBS,k` the (N·M) × P
/// vertical stack of the user's link channels.
pub fn stacked_user_svd_rate(
    channels: &SystemChannels,
    user: usize,
    stream_energy: f64,
    noise_var: f64,
) -> Result<f64> {
    let parts: Vec<ComplexMatrix> = (0..channels.n_sbs())
        .map(|i| channels.get(i, user).matrix.clone())
        .collect();
    log_det_capacity(&ComplexMatrix::vstack(&parts)?, stream_energy, noise_var)
}

/// Everything one Monte Carlo trial needs to evaluate both schemes.
#[derive(Debug, Clone)]
pub struct TrialSystem {
    pub distributed: SystemChannels,
    pub beams: BeamformerSet,
    pub collocated: Vec<ChannelRealization>,
}

pub fn sumrate_mc(
    system: &TrialSystem,
    scheme: Scheme,
    budget: &PowerBudget,
    noise_var: f64,
) -> Result<f64> {
    match scheme {
        Scheme::DistributedHybrid => {
            sumrate_distributed(&system.distributed, &system.beams, budget, noise_var)
        }
        Scheme::CollocatedDigital => sumrate_collocated(&system.collocated, budget, noise_var),
    }
}

/// Per-user block of a downlink effective channel: the user's RF chains
/// against the SBS chains that carry its streams.
pub fn user_block(h_dl: &ComplexMatrix, beams: &BeamformerSet, user: usize) -> EquivalentChannel {
    let assoc = &beams.association;
    let n_d = assoc.n_d();
    let n_r = assoc.n_r();
    let cols: Vec<usize> = assoc
        .serving(user)
        .iter()
        .map(|&j| j * n_r + assoc.sbs_chain(j, user).expect("served"))
        .collect();
    EquivalentChannel {
        matrix: ComplexMatrix::from_fn(n_d, cols.len(), |d, e| h_dl[(user * n_d + d, cols[e])]),
        scope: ChannelScope::PerUser,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn array_factor_matches_direct_sum() {
        for n in [1usize, 2, 5, 8] {
            for x in [0.0, 0.3, -1.7, 2.0 * PI, -2.0 * PI, 4.0 * PI, PI, 1e-14] {
                let direct: C64 = (0..n).map(|m| C64::from_polar(1.0, m as f64 * x)).sum();
                let closed = array_factor(n, x);
                assert!(
                    (direct - closed).norm() < 1e-9,
                    "n={n} x={x}: {direct} vs {closed}"
                );
            }
        }
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(
            rate_bs_closed_form(3, 50, 6, &[1.0], &[0.0], 1.0).unwrap(),
            0.0
        );
        let r = rate_bs_closed_form(1, 10, 10, &[1.0], &[10.0], 1.0).unwrap();
        assert!((r - 1001f64.log2()).abs() < 1e-12);
        let r = rate_sbs_closed_form(10, 50, &[vec![1.0, 1.0]], &[vec![1.0, 1.0]], 1.0).unwrap();
        assert!((r - 2.0 * 501f64.log2()).abs() < 1e-12);
        assert!((r - 17.937).abs() < 1e-3);
        let single = rate_sbs_closed_form(8, 4, &[vec![0.5]], &[vec![2.0]], 0.1).unwrap();
        let bs = rate_bs_closed_form(1, 8, 4, &[0.5], &[2.0], 0.1).unwrap();
        assert!((single - bs).abs() < 1e-12);
    }

    #[test]
    fn rate_gap_residual_identity() {
        // exact − approx = Σ_k log₂(1 + (N²−1)/(1 + N·SNR_k)).
        for n in 1..=6usize {
            for snr in [0.5, 10.0, 1e3, 1e6] {
                let g = rate_gap(n, &[snr, 2.0 * snr]).unwrap();
                let nf = n as f64;
                let expect: f64 = [snr, 2.0 * snr]
                    .iter()
                    .map(|s| (1.0 + (nf * nf - 1.0) / (1.0 + nf * s)).log2())
                    .sum();
                assert!(
                    (g.exact - g.high_snr_approx - expect).abs() < 1e-9,
                    "{n} {snr}"
                );
            }
        }
    }

    #[test]
    fn rate_gap_examples() {
        let g = rate_gap(1, &[1e3]).unwrap();
        assert!(g.exact.abs() < 1e-12 && g.high_snr_approx.abs() < 1e-12);
        let g = rate_gap(2, &[1e3]).unwrap();
        let expect = (501f64 * 501.0 / 2001.0).log2();
        assert!((g.exact - expect).abs() < 1e-12);
        assert!((g.exact - 6.971).abs() < 1e-3);
        assert!((g.high_snr_approx - (501f64.log2() - 2.0)).abs() < 1e-12);
        assert!((g.high_snr_approx - 6.9687).abs() < 1e-4);
        assert!((g.exact - g.high_snr_approx).abs() < 0.01);
        assert!(rate_gap(2, &[0.0]).is_err());
    }

    #[test]
    fn mmse_sic_examples() {
        let h = ComplexMatrix::identity(3);
        let zero = ComplexMatrix::zeros(3, 2);
        assert_eq!(mmse_sic_rate(&h, &zero, 5.0, 3, 1.0).unwrap(), 0.0);
        // Unitary F and H̃: N_D·log₂(1 + E/(Nσ²)).
        let r = mmse_sic_rate(&h, &ComplexMatrix::identity(3), 6.0, 3, 0.5).unwrap();
        assert!((r - 3.0 * (1.0 + 6.0 / 1.5f64).log2()).abs() < 1e-12);
    }

    #[test]
    fn power_budget_split() {
        let b = PowerBudget::from_dbm(10.0, 2, 3).unwrap();
        assert!((b.total_power - 10.0).abs() < 1e-12);
        assert!((b.per_user_energy() - 5.0).abs() < 1e-12);
        assert!((b.per_sbs_stream_energy() * 3.0 - b.per_user_energy()).abs() < 1e-12);
    }
}
