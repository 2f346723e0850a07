//! Analog and digital beamforming for the distributed system.
//!
//! Every SBS points one analog beam at the strongest cluster of each user it
//! serves, and every user points one RF chain at the strongest cluster of
//! each serving SBS. The resulting low-dimensional equivalent channels feed
//! the digital precoders computed at the central unit.

use serde::{Deserialize, Serialize};

use crate::channel::{
    steering_from_cos, ArrayGeometry, ChannelRealization, PathSet, SystemChannels,
};
use crate::error::{Error, Result};
use crate::numerics::{dot_h, norm, pseudo_inverse, svd, ComplexMatrix, C64, RANK_TOL};
use crate::rate::mmse_sic_rate;

/// Tolerance for the constant-modulus and unit-norm checks.
const MODULUS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Sbs,
    User,
}

/// Phase-only beamforming matrix (antennas × RF chains).
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogBeamformer {
    matrix: ComplexMatrix,
    side: Side,
}

impl AnalogBeamformer {
    /// Checks that every entry has modulus `antennas^(-1/2)`, which also makes
    /// every column unit norm.
    pub fn new(matrix: ComplexMatrix, side: Side) -> Result<Self> {
        let target = 1.0 / (matrix.rows() as f64).sqrt();
        if let Some(z) = matrix
            .as_slice()
            .iter()
            .find(|z| (z.norm() - target).abs() > MODULUS_TOL * target)
        {
            return Err(Error::InvalidParameter(format!(
                "analog beamformer entry {z} violates constant modulus {target}"
            )));
        }
        Ok(Self { matrix, side })
    }

    pub fn from_columns(columns: &[Vec<C64>], side: Side) -> Result<Self> {
        Self::new(ComplexMatrix::from_columns(columns)?, side)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn antennas(&self) -> usize {
        self.matrix.rows()
    }

    pub fn rf_chains(&self) -> usize {
        self.matrix.cols()
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        self.matrix.column(j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelScope {
    /// One SBS beam to one user: P × 1.
    PerLink,
    /// All serving SBS beams of one user, before user combining: P × N_D.
    PerUser,
    /// SBS RF chains × user RF chains (uplink orientation): N·N_R × K·N_D.
    SystemStacked,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalentChannel {
    pub matrix: ComplexMatrix,
    pub scope: ChannelScope,
}

/// `(1/√M)·conj(a_sbs(θ₁))`: transmit beam matched to the strongest cluster.
pub fn sbs_analog_beamformer(path_set: &PathSet, sbs_geom: &ArrayGeometry) -> Vec<C64> {
    conj_normalized(&steering_from_cos(
        sbs_geom,
        path_set.strongest().aoa_sbs.cos(),
    ))
}

/// `(1/√P)·conj(h)` for the user-side steering vector `h` of the strongest
/// path; the received strongest-path component is along `conj(h)`, so the
/// combining gain is `√P`.
pub fn user_analog_beamformer(strongest_path: &[C64]) -> Vec<C64> {
    conj_normalized(strongest_path)
}

fn conj_normalized(v: &[C64]) -> Vec<C64> {
    let s = 1.0 / (v.len() as f64).sqrt();
    v.iter().map(|z| z.conj() * s).collect()
}

/// `Hᵀ·f_sbs`: the P-vector a user sees from one SBS beam.
pub fn equivalent_link_channel(h: &ChannelRealization, f_sbs: &[C64]) -> Result<Vec<C64>> {
    transpose_mul(&h.matrix, f_sbs)
}

/// `Hᵀ·f` for an M × P matrix `H` and an M-vector `f`.
pub(crate) fn transpose_mul(h: &ComplexMatrix, f: &[C64]) -> Result<Vec<C64>> {
    if f.len() != h.rows() {
        return Err(Error::Dimension(format!(
            "beam of length {} for a {}x{} channel",
            f.len(),
            h.rows(),
            h.cols()
        )));
    }
    let mut out = vec![C64::new(0.0, 0.0); h.cols()];
    for (i, fi) in f.iter().enumerate() {
        for (o, hij) in out.iter_mut().zip(h.row(i)) {
            *o += hij * fi;
        }
    }
    Ok(out)
}

/// Concatenates per-link equivalent vectors column-wise, in SBS order.
pub fn equivalent_user_channel(links: &[Vec<C64>]) -> Result<EquivalentChannel> {
    Ok(EquivalentChannel {
        matrix: ComplexMatrix::from_columns(links)?,
        scope: ChannelScope::PerUser,
    })
}

/// Which SBSs serve which users. Each user is served by `n_d` distinct SBSs
/// (one stream per serving SBS) and each SBS serves `n_r` distinct users.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Association {
    serving: Vec<Vec<usize>>,
    served: Vec<Vec<usize>>,
}

impl Association {
    /// `serving[k]` lists the SBSs of user `k`; the order fixes the user's
    /// RF-chain order.
    pub fn new(serving: Vec<Vec<usize>>, n_sbs: usize, n_r: usize) -> Result<Self> {
        let mut served = vec![Vec::new(); n_sbs];
        for (k, list) in serving.iter().enumerate() {
            for (pos, &i) in list.iter().enumerate() {
                if i >= n_sbs {
                    return Err(Error::InvalidParameter(format!(
                        "user {k} served by SBS {i}"
                    )));
                }
                if list[..pos].contains(&i) {
                    return Err(Error::InvalidParameter(format!(
                        "user {k} lists SBS {i} twice"
                    )));
                }
                served[i].push(k);
            }
        }
        if let Some(i) = served.iter().position(|s| s.len() != n_r) {
            return Err(Error::InvalidParameter(format!(
                "SBS {i} serves {} users but has {n_r} RF chains",
                served[i].len()
            )));
        }
        let n_d = serving.first().map_or(0, Vec::len);
        if serving.iter().any(|s| s.len() != n_d) {
            return Err(Error::InvalidParameter(
                "users have unequal stream counts".into(),
            ));
        }
        Ok(Self { serving, served })
    }

    /// Every user served by every SBS (requires `N_D = N` and `N_R = K`).
    pub fn full(n_sbs: usize, n_users: usize) -> Self {
        Self::new(vec![(0..n_sbs).collect(); n_users], n_sbs, n_users)
            .expect("full association is always consistent")
    }

    /// Greedy strongest-link assignment under the RF-chain budgets. Links are
    /// visited by decreasing `strength(sbs, user)`; ties keep index order.
    pub fn strongest_links(
        n_sbs: usize,
        n_users: usize,
        n_r: usize,
        n_d: usize,
        strength: impl Fn(usize, usize) -> f64,
    ) -> Result<Self> {
        check_balance(n_sbs, n_r, n_users, n_d)?;
        if n_d > n_sbs || n_r > n_users {
            return Err(Error::InvalidParameter(format!(
                "cannot serve {n_d} streams per user from {n_sbs} SBSs ({n_r} chains each)"
            )));
        }
        let mut links: Vec<(usize, usize, f64)> = (0..n_sbs)
            .flat_map(|i| (0..n_users).map(move |k| (i, k)))
            .map(|(i, k)| (i, k, strength(i, k)))
            .collect();
        links.sort_by(|a, b| b.2.total_cmp(&a.2));
        let mut serving: Vec<Vec<usize>> = vec![Vec::new(); n_users];
        let mut served: Vec<Vec<usize>> = vec![Vec::new(); n_sbs];
        for &(i, k, _) in &links {
            if serving[k].len() < n_d && served[i].len() < n_r {
                serving[k].push(i);
                served[i].push(k);
            }
        }
        // The greedy pass can strand a user whose missing SBSs are all full;
        // reroute along augmenting paths (always possible on a complete
        // bipartite graph with balanced budgets).
        for k in 0..n_users {
            while serving[k].len() < n_d {
                let mut visited = vec![false; n_sbs];
                if !augment(k, n_r, &mut serving, &mut served, &mut visited) {
                    return Err(Error::InvalidParameter(
                        "no association satisfies the RF-chain budgets".into(),
                    ));
                }
            }
        }
        for s in &mut serving {
            s.sort_unstable();
        }
        Self::new(serving, n_sbs, n_r)
    }

    pub fn serving(&self, user: usize) -> &[usize] {
        &self.serving[user]
    }

    pub fn served(&self, sbs: usize) -> &[usize] {
        &self.served[sbs]
    }

    pub fn n_users(&self) -> usize {
        self.serving.len()
    }

    pub fn n_sbs(&self) -> usize {
        self.served.len()
    }

    pub fn n_d(&self) -> usize {
        self.serving[0].len()
    }

    pub fn n_r(&self) -> usize {
        self.served[0].len()
    }

    /// Position of `user` among the users served by `sbs`.
    pub fn sbs_chain(&self, sbs: usize, user: usize) -> Option<usize> {
        self.served[sbs].iter().position(|&u| u == user)
    }

    /// Position of `sbs` among the SBSs serving `user`.
    pub fn user_chain(&self, user: usize, sbs: usize) -> Option<usize> {
        self.serving[user].iter().position(|&s| s == sbs)
    }
}

/// Finds an SBS for `user` not already serving it, moving other users
/// between SBSs if needed.
fn augment(
    user: usize,
    n_r: usize,
    serving: &mut [Vec<usize>],
    served: &mut [Vec<usize>],
    visited: &mut [bool],
) -> bool {
    for i in 0..served.len() {
        if visited[i] || serving[user].contains(&i) {
            continue;
        }
        visited[i] = true;
        if served[i].len() < n_r {
            serving[user].push(i);
            served[i].push(user);
            return true;
        }
        for pos in 0..served[i].len() {
            let other = served[i][pos];
            if other == user {
                continue;
            }
            // Free a chain on SBS i by moving `other` elsewhere.
            served[i].remove(pos);
            serving[other].retain(|&s| s != i);
            if augment(other, n_r, serving, served, visited) {
                serving[user].push(i);
                served[i].push(user);
                return true;
            }
            served[i].insert(pos, other);
            serving[other].push(i);
        }
    }
    false
}

/// `N·N_R = K·N_D`.
pub fn check_balance(n_sbs: usize, n_r: usize, n_users: usize, n_d: usize) -> Result<()> {
    if n_sbs * n_r != n_users * n_d {
        return Err(Error::InvalidParameter(format!(
            "RF-chain balance N·N_R = K·N_D violated: {n_sbs}·{n_r} != {n_users}·{n_d}"
        )));
    }
    Ok(())
}

/// Digital precoders computed at the central unit.
#[derive(Debug, Clone, PartialEq)]
pub enum DigitalPrecoder {
    /// One `N_D × streams` matrix per user, acting on its serving SBS beams.
    PerUserSvd(Vec<ComplexMatrix>),
    /// One `N·N_R × K·N_D` matrix on all SBS RF chains.
    StackedZf(ComplexMatrix),
}

/// Analog beamformers of every SBS and user plus the association that
/// orders their columns, and optionally a digital precoder.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    pub association: Association,
    /// Per SBS, `M × N_R`; column `r` points at user `association.served(i)[r]`.
    pub sbs: Vec<AnalogBeamformer>,
    /// Per user, `P × N_D`; column `d` points at SBS `association.serving(k)[d]`.
    pub users: Vec<AnalogBeamformer>,
    pub digital: Option<DigitalPrecoder>,
}

impl BeamformerSet {
    /// Strongest-path beamformers on both sides with perfect knowledge of the
    /// strongest clusters.
    pub fn strongest_path(channels: &SystemChannels, association: Association) -> Result<Self> {
        let sbs = (0..channels.n_sbs())
            .map(|i| {
                let cols: Vec<Vec<C64>> = association
                    .served(i)
                    .iter()
                    .map(|&k| {
                        let link = channels.get(i, k);
                        sbs_analog_beamformer(&link.path_set, &link.sbs_geom)
                    })
                    .collect();
                AnalogBeamformer::from_columns(&cols, Side::Sbs)
            })
            .collect::<Result<Vec<_>>>()?;
        let users = (0..channels.n_users())
            .map(|k| {
                let cols: Vec<Vec<C64>> = association
                    .serving(k)
                    .iter()
                    .map(|&i| {
                        let link = channels.get(i, k);
                        let h = steering_from_cos(
                            &link.user_geom,
                            link.path_set.strongest().aoa_user.cos(),
                        );
                        user_analog_beamformer(&h)
                    })
                    .collect();
                AnalogBeamformer::from_columns(&cols, Side::User)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            association,
            sbs,
            users,
            digital: None,
        })
    }

    /// Transmit beam of `sbs` toward `user`, if it serves that user.
    pub fn sbs_beam(&self, sbs: usize, user: usize) -> Option<Vec<C64>> {
        self.association
            .sbs_chain(sbs, user)
            .map(|r| self.sbs[sbs].column(r))
    }

    /// Per-user equivalent channel: columns `H_{i,k}ᵀ f_{SBS,i,k}` over the
    /// serving SBSs of `user`.
    pub fn user_equivalent_channel(
        &self,
        channels: &SystemChannels,
        user: usize,
    ) -> Result<EquivalentChannel> {
        let links = self
            .association
            .serving(user)
            .iter()
            .map(|&i| {
                let f = self.sbs_beam(i, user).expect("serving SBS has a beam");
                equivalent_link_channel(channels.get(i, user), &f)
            })
            .collect::<Result<Vec<_>>>()?;
        equivalent_user_channel(&links)
    }

    /// Downlink channel from every SBS RF chain to every user RF chain after
    /// both analog stages: `K·N_D × N·N_R`, entry `((k,d),(j,r))` equal to
    /// `f_{k,d}ᴴ H_{j,k}ᵀ f_{SBS,j,r}`.
    pub fn downlink_effective_channel(&self, channels: &SystemChannels) -> Result<ComplexMatrix> {
        let n_d = self.association.n_d();
        let n_r = self.association.n_r();
        let mut out = ComplexMatrix::zeros(channels.n_users() * n_d, channels.n_sbs() * n_r);
        for k in 0..channels.n_users() {
            let fk = self.users[k].matrix();
            for j in 0..channels.n_sbs() {
                let h = &channels.get(j, k).matrix;
                for r in 0..n_r {
                    let y = transpose_mul(h, &self.sbs[j].column(r))?;
                    for d in 0..n_d {
                        let f = fk.column(d);
                        out[(k * n_d + d, j * n_r + r)] = dot_h(&f, &y);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Uplink analog weights: conjugates of the downlink beams, so that the
    /// uplink equivalent channel is the transpose of the downlink one.
    pub fn uplink_weights(&self) -> (Vec<AnalogBeamformer>, Vec<AnalogBeamformer>) {
        let conj = |b: &AnalogBeamformer| AnalogBeamformer {
            matrix: b.matrix.conj(),
            side: b.side,
        };
        (
            self.sbs.iter().map(conj).collect(),
            self.users.iter().map(conj).collect(),
        )
    }
}

/// Stacks `F_{SBS,i}ᴴ · H_{i,k} · F_k` into block row `i`, block column `k`.
pub fn stacked_equivalent_channel(
    channels: &SystemChannels,
    f_sbs_all: &[AnalogBeamformer],
    f_user_all: &[AnalogBeamformer],
) -> Result<EquivalentChannel> {
    let n = channels.n_sbs();
    let k_users = channels.n_users();
    if f_sbs_all.len() != n || f_user_all.len() != k_users {
        return Err(Error::Dimension(format!(
            "{} SBS and {} user beamformers for a {n}x{k_users} system",
            f_sbs_all.len(),
            f_user_all.len()
        )));
    }
    let n_r = f_sbs_all[0].rf_chains();
    let n_d = f_user_all[0].rf_chains();
    if f_sbs_all.iter().any(|f| f.rf_chains() != n_r)
        || f_user_all.iter().any(|f| f.rf_chains() != n_d)
    {
        return Err(Error::Dimension("unequal RF-chain counts".into()));
    }
    check_balance(n, n_r, k_users, n_d)?;
    let mut out = ComplexMatrix::zeros(n * n_r, k_users * n_d);
    for (i, f_sbs) in f_sbs_all.iter().enumerate() {
        for (k, f_user) in f_user_all.iter().enumerate() {
            let block = f_sbs
                .matrix()
                .adjoint_matmul(&channels.get(i, k).matrix)?
                .matmul(f_user.matrix())?;
            out.set_block(i * n_r, k * n_d, &block);
        }
    }
    Ok(EquivalentChannel {
        matrix: out,
        scope: ChannelScope::SystemStacked,
    })
}

/// Right singular vectors for the `num_streams` largest singular values,
/// read with the equivalent channel's columns as transmit dimensions.
pub fn svd_digital_precoder(h_eq: &EquivalentChannel, num_streams: usize) -> Result<ComplexMatrix> {
    let (rows, cols) = h_eq.matrix.shape();
    if num_streams == 0 || num_streams > rows.min(cols) {
        return Err(Error::InvalidParameter(format!(
            "{num_streams} streams for a {rows}x{cols} channel"
        )));
    }
    let r = svd(&h_eq.matrix)?;
    Ok(r.right_vectors.block(0, 0, cols, num_streams))
}

/// Zero-forcing precoder for a downlink channel (receive chains × transmit
/// chains): pseudo-inverse columns scaled to unit norm.
pub fn zf_digital_precoder(h: &EquivalentChannel) -> Result<ComplexMatrix> {
    let (rows, cols) = h.matrix.shape();
    if rows > cols {
        return Err(Error::RankDeficient {
            rank: cols,
            required: rows,
        });
    }
    let r = svd(&h.matrix)?;
    let rank = r.rank(RANK_TOL);
    if rank < rows {
        return Err(Error::RankDeficient {
            rank,
            required: rows,
        });
    }
    let mut w = pseudo_inverse(&h.matrix)?;
    for j in 0..w.cols() {
        let col = w.column(j);
        let n = norm(&col);
        w.set_column(j, &col.iter().map(|z| z / n).collect::<Vec<_>>());
    }
    Ok(w)
}

/// Greedy column-by-column search over `codebook` for the user combiner
/// maximizing `log₂det[I + E/(Nσ²)·Fᴴ H̃ᵀ H̃* F]`, where `h_eq_user` is `H̃ᵀ`
/// (P × streams). Ties go to the lowest codebook index.
pub fn codebook_user_beamformer_search(
    h_eq_user: &ComplexMatrix,
    codebook: &[Vec<C64>],
    n_d: usize,
    symbol_energy: f64,
    n_sbs: usize,
    noise_var: f64,
) -> Result<(AnalogBeamformer, f64)> {
    if n_d == 0 || codebook.len() < n_d {
        return Err(Error::InvalidParameter(format!(
            "cannot pick {n_d} beams from a codebook of {}",
            codebook.len()
        )));
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(n_d);
    let mut best_value = 0.0;
    for _ in 0..n_d {
        let mut best: Option<(usize, f64)> = None;
        for (idx, _) in codebook.iter().enumerate() {
            if chosen.contains(&idx) {
                continue;
            }
            let cols: Vec<Vec<C64>> = chosen
                .iter()
                .chain(std::iter::once(&idx))
                .map(|&c| codebook[c].clone())
                .collect();
            let f = ComplexMatrix::from_columns(&cols)?;
            let value = mmse_sic_rate(h_eq_user, &f, symbol_energy, n_sbs, noise_var)?;
            if best.is_none_or(|(_, v)| value > v) {
                best = Some((idx, value));
            }
        }
        let (idx, value) = best.expect("codebook has unchosen entries");
        chosen.push(idx);
        best_value = value;
    }
    let cols: Vec<Vec<C64>> = chosen.iter().map(|&c| codebook[c].clone()).collect();
    Ok((
        AnalogBeamformer::from_columns(&cols, Side::User)?,
        best_value,
    ))
}
