//! Codeword matrices: the received deterministic signal written as a linear
//! map of the stacked path gains.
//!
//! For receive antenna `j` the column of path `p` from transmit antenna `m`
//! is `A·P_j·Φ_{R,j}·B_{p,j,m}·š_m`, where `š_m` is the transmit-chain
//! output and `B = Γ·Δ_k·Π^l` the unit-gain path operator. Stacking the
//! columns in `m·P + p` order gives `y_j = Ξ_j(x)·h_j + noise`.

use crate::error::{check_len, Result};
use crate::link::ImpairedLink;
use crate::math::{CMat, CVec, C64};

#[derive(Debug, Clone)]
pub struct CodewordOperator {
    /// One `N × MP` block per receive antenna.
    pub blocks: Vec<CMat>,
}

impl CodewordOperator {
    /// Builds `Ξ(x)` from explicit transmit-chain outputs `š` (length `NM`).
    pub fn from_transmit_samples(link: &ImpairedLink, chain: &CVec) -> Result<Self> {
        check_len(link.tx_len(), chain.len())?;
        let n = link.n();
        let paths = link.channel().paths;
        let blocks = (0..link.rx)
            .map(|j| {
                let mut blk = CMat::zeros(n, link.tx * paths);
                for m in 0..link.tx {
                    let sm = &chain.as_slice()[m * n..(m + 1) * n];
                    for p in 0..paths {
                        let col = link.path_response(j, m, p, sm);
                        blk.column_mut(m * paths + p).copy_from_slice(&col);
                    }
                }
                blk
            })
            .collect();
        Ok(Self { blocks })
    }

    /// `Ξ(x)` including the DC column and the frame's distortion draws.
    pub fn full(link: &ImpairedLink, x: &CVec, dac_noise: &CVec, pa_noise: &CVec) -> Result<Self> {
        let chain = link.transmit_chain(x, dac_noise, pa_noise)?;
        Self::from_transmit_samples(link, &chain)
    }

    /// The part of `Ξ` that is linear in the symbols,
    /// `ρ1 Υ¹ e + ρ2 Υ̃¹ e*`. Codeword differences `Ξ(x_c) − Ξ(x_e)` reduce to
    /// this map of `e = x_c − x_e`.
    pub fn linear(link: &ImpairedLink, e: &CVec) -> Result<Self> {
        check_len(link.tx_len(), e.len())?;
        let n = link.n();
        let s = &link.scalars;
        let gain = s.linear_gain();
        let mut chain = CVec::zeros(link.tx_len());
        for m in 0..link.tx {
            let td = link.daft().modulate(&e.as_slice()[m * n..(m + 1) * n])?;
            for i in 0..n {
                let rotated = link.hwi.phi_t[m][i] * td[i];
                chain[m * n + i] = gain * (s.rho1 * rotated + s.rho2 * rotated.conj());
            }
        }
        Self::from_transmit_samples(link, &chain)
    }

    /// `Ξ·h` for gains ordered `j·(M·P) + m·P + p`.
    pub fn apply(&self, gains: &[C64]) -> Result<CVec> {
        let width = self.blocks[0].ncols();
        check_len(width * self.blocks.len(), gains.len())?;
        let n = self.blocks[0].nrows();
        let mut out = CVec::zeros(n * self.blocks.len());
        for (j, blk) in self.blocks.iter().enumerate() {
            let h = CVec::from_column_slice(&gains[j * width..(j + 1) * width]);
            out.rows_mut(j * n, n).copy_from(&(blk * h));
        }
        Ok(out)
    }

    /// Per-receive-antenna Gram blocks `Ω_j = Ξ_jᴴ Ξ_j`.
    pub fn omega_blocks(&self) -> Vec<CMat> {
        self.blocks.iter().map(|b| b.adjoint() * b).collect()
    }

    /// Block-diagonal `Ω` of size `L × L`, `L = PMJ`.
    pub fn omega(&self) -> CMat {
        let blocks = self.omega_blocks();
        let w = blocks[0].nrows();
        let mut out = CMat::zeros(w * blocks.len(), w * blocks.len());
        for (j, b) in blocks.iter().enumerate() {
            out.view_mut((j * w, j * w), (w, w)).copy_from(b);
        }
        out
    }

    /// Eigenvalues of `Ω`, clamped at zero.
    pub fn omega_eigenvalues(&self) -> Vec<f64> {
        self.omega_blocks()
            .into_iter()
            .flat_map(|b| {
                let herm = (&b + b.adjoint()) * C64::new(0.5, 0.0);
                herm.symmetric_eigenvalues().iter().map(|v| v.max(0.0)).collect::<Vec<_>>()
            })
            .collect()
    }
}
