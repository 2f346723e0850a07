//! Clustered narrowband mmWave channels between uniform linear arrays.
//!
//! A link between SBS `i` and user `k` is
//!
//! ```text
//! H = √ϖ · √(1/N_cl) · Σ_l α_l · a_sbs(θ_l) · a_user(φ_l)ᴴ      (M × P)
//! ```
//!
//! with ULA responses `a(ψ)[m] = exp(−j·2π·m·(d/λ)·cos ψ)`. Gains are sorted
//! by magnitude, the strongest-to-rest power ratio ς is met exactly, and
//! `Σ|α_l|² = N_cl` so that `E‖H‖²_F = ϖ·M·P` for any cluster count.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, C64};
use crate::rng::SimRng;

/// Uniform linear array: element count and spacing in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    num_antennas: usize,
    spacing_ratio: f64,
}

impl ArrayGeometry {
    pub const DEFAULT_SPACING: f64 = 0.5;

    pub fn new(num_antennas: usize, spacing_ratio: f64) -> Result<Self> {
        if num_antennas == 0 {
            return Err(Error::InvalidParameter(
                "array needs at least one antenna".into(),
            ));
        }
        if !(spacing_ratio > 0.0) || !spacing_ratio.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "spacing ratio must be finite and positive, got {spacing_ratio}"
            )));
        }
        Ok(Self {
            num_antennas,
            spacing_ratio,
        })
    }

    /// Half-wavelength spaced array.
    pub fn half_wavelength(num_antennas: usize) -> Result<Self> {
        Self::new(num_antennas, Self::DEFAULT_SPACING)
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn spacing_ratio(&self) -> f64 {
        self.spacing_ratio
    }
}

fn check_angle(angle: f64) -> Result<()> {
    if !(0.0..=PI).contains(&angle) {
        return Err(Error::InvalidParameter(format!(
            "angle {angle} outside [0, π]"
        )));
    }
    Ok(())
}

/// Array response `[1, e^{−j2π(d/λ)cos ψ}, …]`; every entry has unit modulus.
pub fn steering_vector(geometry: &ArrayGeometry, angle: f64) -> Result<Vec<C64>> {
    check_angle(angle)?;
    Ok(steering_from_cos(geometry, angle.cos()))
}

/// Array response parameterized directly by the direction cosine.
pub(crate) fn steering_from_cos(geometry: &ArrayGeometry, cos_angle: f64) -> Vec<C64> {
    let k = -2.0 * PI * geometry.spacing_ratio * cos_angle;
    (0..geometry.num_antennas)
        .map(|m| C64::from_polar(1.0, k * m as f64))
        .collect()
}

/// One propagation cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    /// Angle at the SBS array, radians in [0, π].
    pub aoa_sbs: f64,
    /// Angle at the user array, radians in [0, π].
    pub aoa_user: f64,
    pub gain: C64,
}

/// How user-side angles are drawn for the clusters of one link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserAoaMode {
    /// Each cluster has its own user-side angle.
    #[default]
    PerCluster,
    /// All clusters of a link share one user-side angle.
    Shared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    paths: Vec<Path>,
    power_ratio: f64,
}

impl PathSet {
    /// Validates ordering (non-increasing |α|) and angle ranges.
    pub fn new(paths: Vec<Path>, power_ratio: f64) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidParameter(
                "path set needs at least one path".into(),
            ));
        }
        for p in &paths {
            check_angle(p.aoa_sbs)?;
            check_angle(p.aoa_user)?;
            if !p.gain.is_finite() {
                return Err(Error::NonFinite(format!("path gain {}", p.gain)));
            }
        }
        // Equal-power clusters may differ in the last ulp after polar round trips.
        if paths
            .windows(2)
            .any(|w| w[0].gain.norm() < w[1].gain.norm() * (1.0 - 1e-12))
        {
            return Err(Error::InvalidParameter(
                "path gains must be sorted by non-increasing magnitude".into(),
            ));
        }
        if !(power_ratio >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "power ratio {power_ratio}"
            )));
        }
        Ok(Self { paths, power_ratio })
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn n_cl(&self) -> usize {
        self.paths.len()
    }

    pub fn strongest(&self) -> &Path {
        &self.paths[0]
    }

    /// Nominal ς used to draw the gains (meaningless when `n_cl == 1`).
    pub fn power_ratio(&self) -> f64 {
        self.power_ratio
    }

    pub fn total_power(&self) -> f64 {
        self.paths.iter().map(|p| p.gain.norm_sqr()).sum()
    }

    /// `|α₁|² / Σ_l |α_l|²`, i.e. ς/(ς+1); exactly 1 for a single cluster.
    pub fn strongest_power_fraction(&self) -> f64 {
        self.paths[0].gain.norm_sqr() / self.total_power()
    }

    /// Realized `|α₁|² / Σ_{l≥2} |α_l|²`; infinite for a single cluster.
    pub fn realized_power_ratio(&self) -> f64 {
        let rest: f64 = self.paths[1..].iter().map(|p| p.gain.norm_sqr()).sum();
        self.paths[0].gain.norm_sqr() / rest
    }
}

/// Draws `n_cl` clusters with i.i.d. uniform angles and gains satisfying the
/// sorting, power-ratio and normalization constraints exactly.
pub fn draw_paths(
    rng: &mut SimRng,
    n_cl: usize,
    power_ratio: f64,
    user_aoa: UserAoaMode,
) -> Result<PathSet> {
    if n_cl == 0 {
        return Err(Error::InvalidParameter("n_cl must be at least 1".into()));
    }
    if n_cl > 1 && !(power_ratio > 0.0 && power_ratio.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "power ratio must be finite and positive, got {power_ratio}"
        )));
    }
    let shared_user = rng.angle();
    let mut raw: Vec<(f64, f64, f64, f64)> = (0..n_cl)
        .map(|l| {
            let aoa_sbs = rng.angle();
            let aoa_user = match user_aoa {
                UserAoaMode::Shared => shared_user,
                UserAoaMode::PerCluster if l == 0 => shared_user,
                UserAoaMode::PerCluster => rng.angle(),
            };
            let magnitude = rng.complex_normal().norm();
            let phase = rng.phase();
            (aoa_sbs, aoa_user, magnitude, phase)
        })
        .collect();
    raw.sort_by(|a, b| b.2.total_cmp(&a.2));

    let powers = cluster_powers(
        &raw.iter().map(|r| r.2 * r.2).collect::<Vec<_>>(),
        power_ratio,
    )?;
    let paths = raw
        .iter()
        .zip(&powers)
        .map(|(&(aoa_sbs, aoa_user, _, phase), &pw)| Path {
            aoa_sbs,
            aoa_user,
            gain: C64::from_polar(pw.sqrt(), phase),
        })
        .collect();
    PathSet::new(paths, power_ratio)
}

/// Rescales sorted raw cluster powers so that the strongest carries
/// `n·ς/(ς+1)` and the rest share `n/(ς+1)` in proportion to their raw
/// values. Scattered clusters are capped at the strongest power so ordering
/// survives small ς; the cap redistributes the excess over the uncapped ones.
fn cluster_powers(raw_sorted: &[f64], power_ratio: f64) -> Result<Vec<f64>> {
    let n = raw_sorted.len();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let total = n as f64;
    let strongest = total * power_ratio / (power_ratio + 1.0);
    let rest_target = total / (power_ratio + 1.0);
    if rest_target > strongest * (n - 1) as f64 * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "power ratio {power_ratio} cannot be met with {n} sorted clusters (needs ς ≥ 1/{})",
            n - 1
        )));
    }
    let rest = &raw_sorted[1..];
    let mut capped = 0;
    let scale = loop {
        let free: f64 = rest[capped..].iter().sum();
        let budget = rest_target - capped as f64 * strongest;
        if capped == rest.len() || free <= 0.0 {
            // Everything capped or degenerate raw draws: split evenly.
            break None;
        }
        let s = budget / free;
        if s * rest[capped] <= strongest {
            break Some(s);
        }
        capped += 1;
    };
    let mut out = Vec::with_capacity(n);
    out.push(strongest);
    match scale {
        Some(s) => {
            out.extend((0..rest.len()).map(|l| if l < capped { strongest } else { s * rest[l] }))
        }
        None => out.extend(std::iter::repeat_n(
            rest_target / rest.len() as f64,
            rest.len(),
        )),
    }
    Ok(out)
}

/// A channel matrix with the clusters and path loss that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub matrix: ComplexMatrix,
    pub path_set: PathSet,
    pub path_loss: f64,
    pub sbs_geom: ArrayGeometry,
    pub user_geom: ArrayGeometry,
}

impl ChannelRealization {
    /// The strongest-cluster term of the sum alone.
    pub fn strongest_component(&self) -> ComplexMatrix {
        assemble_terms(
            &self.path_set.paths()[..1],
            self.path_set.n_cl(),
            &self.sbs_geom,
            &self.user_geom,
            self.path_loss,
        )
    }

    /// All clusters except the strongest; a zero matrix for pure LOS.
    pub fn scattered_component(&self) -> ComplexMatrix {
        assemble_terms(
            &self.path_set.paths()[1..],
            self.path_set.n_cl(),
            &self.sbs_geom,
            &self.user_geom,
            self.path_loss,
        )
    }
}

fn assemble_terms(
    paths: &[Path],
    n_cl: usize,
    sbs_geom: &ArrayGeometry,
    user_geom: &ArrayGeometry,
    path_loss: f64,
) -> ComplexMatrix {
    let m = sbs_geom.num_antennas();
    let p = user_geom.num_antennas();
    let mut h = ComplexMatrix::zeros(m, p);
    let amp = (path_loss / n_cl as f64).sqrt();
    for path in paths {
        let a = steering_from_cos(sbs_geom, path.aoa_sbs.cos());
        let b = steering_from_cos(user_geom, path.aoa_user.cos());
        let coeff = path.gain * amp;
        for (i, ai) in a.iter().enumerate() {
            let ca = coeff * ai;
            for (j, bj) in b.iter().enumerate() {
                h[(i, j)] += ca * bj.conj();
            }
        }
    }
    h
}

pub fn assemble_channel(
    path_set: PathSet,
    sbs_geom: ArrayGeometry,
    user_geom: ArrayGeometry,
    path_loss: f64,
) -> Result<ChannelRealization> {
    if !(path_loss >= 0.0) || !path_loss.is_finite() {
        return Err(Error::InvalidParameter(format!("path loss {path_loss}")));
    }
    let matrix = assemble_terms(
        path_set.paths(),
        path_set.n_cl(),
        &sbs_geom,
        &user_geom,
        path_loss,
    );
    Ok(ChannelRealization {
        matrix,
        path_set,
        path_loss,
        sbs_geom,
        user_geom,
    })
}

/// Cluster-model parameters shared by every link of a system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub n_cl: usize,
    pub power_ratio: f64,
    pub user_aoa: UserAoaMode,
}

/// Large-scale attenuation ϖ per (SBS, user) link.
#[derive(Debug, Clone, PartialEq)]
pub enum PathLoss {
    Uniform(f64),
    /// Row-major over (sbs, user).
    PerLink {
        n_users: usize,
        values: Vec<f64>,
    },
}

impl PathLoss {
    pub fn get(&self, sbs: usize, user: usize) -> f64 {
        match self {
            PathLoss::Uniform(v) => *v,
            PathLoss::PerLink { n_users, values } => values[sbs * n_users + user],
        }
    }
}

/// The N × K link channels of a distributed system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemChannels {
    n_sbs: usize,
    n_users: usize,
    links: Vec<ChannelRealization>,
}

impl SystemChannels {
    pub fn new(n_sbs: usize, n_users: usize, links: Vec<ChannelRealization>) -> Result<Self> {
        if links.len() != n_sbs * n_users || links.is_empty() {
            return Err(Error::Dimension(format!(
                "{} links for a {n_sbs}x{n_users} system",
                links.len()
            )));
        }
        Ok(Self {
            n_sbs,
            n_users,
            links,
        })
    }

    pub fn n_sbs(&self) -> usize {
        self.n_sbs
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn get(&self, sbs: usize, user: usize) -> &ChannelRealization {
        &self.links[sbs * self.n_users + user]
    }

    pub fn links(&self) -> &[ChannelRealization] {
        &self.links
    }

    pub fn sbs_antennas(&self) -> usize {
        self.links[0].sbs_geom.num_antennas()
    }

    pub fn user_antennas(&self) -> usize {
        self.links[0].user_geom.num_antennas()
    }
}

/// Draws every link from its own child stream, in (sbs, user) row-major order.
#[allow(clippy::too_many_arguments)]
pub fn draw_system_channels(
    rng: &mut SimRng,
    n_sbs: usize,
    n_users: usize,
    sbs_geom: ArrayGeometry,
    user_geom: ArrayGeometry,
    model: &ClusterModel,
    path_loss: &PathLoss,
) -> Result<SystemChannels> {
    if n_sbs == 0 || n_users == 0 {
        return Err(Error::InvalidParameter(
            "system needs at least one SBS and one user".into(),
        ));
    }
    let mut links = Vec::with_capacity(n_sbs * n_users);
    for i in 0..n_sbs {
        for k in 0..n_users {
            let mut link_rng = rng.split();
            let paths = draw_paths(&mut link_rng, model.n_cl, model.power_ratio, model.user_aoa)?;
            links.push(assemble_channel(
                paths,
                sbs_geom,
                user_geom,
                path_loss.get(i, k),
            )?);
        }
    }
    SystemChannels::new(n_sbs, n_users, links)
}

/// Single (N·M) × P channel of a collocated array drawn from the same model.
pub fn collocated_channel(
    rng: &mut SimRng,
    bs_geom: ArrayGeometry,
    user_geom: ArrayGeometry,
    model: &ClusterModel,
    path_loss: f64,
) -> Result<ChannelRealization> {
    let mut link_rng = rng.split();
    let paths = draw_paths(&mut link_rng, model.n_cl, model.power_ratio, model.user_aoa)?;
    assemble_channel(paths, bs_geom, user_geom, path_loss)
}
