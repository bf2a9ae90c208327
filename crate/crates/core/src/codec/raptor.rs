use serde::{Deserialize, Serialize};

use super::degree::DegreeDistribution;
use crate::error::{Error, Result};
use crate::gf2::Gf2Matrix;
use crate::rng;

/// Intermediate symbols per source symbol used by [`CodecParams::standard`].
///
/// LT rows that land only on the identity part of the precode reveal source
/// symbols directly; with ten intermediates per source symbol such rows are
/// rare enough that a single-session eavesdropper recovers almost nothing
/// below the rank threshold.
pub const DEFAULT_EXPANSION: usize = 10;
pub const DEFAULT_SOLITON_C: f64 = 0.1;
pub const DEFAULT_SOLITON_DELTA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecParams {
    /// Source symbols per generation.
    pub g: usize,
    /// Intermediate symbols produced by the precode.
    pub m: usize,
    pub distribution: DegreeDistribution,
    pub seed: u64,
    /// Feedback window in slots; 0 selects no-response mode.
    pub feedback_window: u32,
}

impl CodecParams {
    pub fn new(g: usize, m: usize, distribution: DegreeDistribution, seed: u64) -> Result<Self> {
        let p = CodecParams {
            g,
            m,
            distribution,
            seed,
            feedback_window: 0,
        };
        p.validate()?;
        Ok(p)
    }

    /// `m = 10 g` intermediate symbols and a robust soliton over them.
    pub fn standard(g: usize, seed: u64) -> Result<Self> {
        let m = g * DEFAULT_EXPANSION;
        let dist = DegreeDistribution::robust_soliton(m.max(1), DEFAULT_SOLITON_C, DEFAULT_SOLITON_DELTA)?;
        Self::new(g, m, dist, seed)
    }

    pub fn with_feedback_window(mut self, w: u32) -> Self {
        self.feedback_window = w;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.g == 0 {
            return Err(Error::params("block length g must be at least 1"));
        }
        if self.m < self.g {
            return Err(Error::params(format!(
                "intermediate count m = {} is below block length g = {}",
                self.m, self.g
            )));
        }
        if self.distribution.max_degree() > self.m {
            return Err(Error::params(format!(
                "degree distribution reaches {} but only {} intermediate symbols exist",
                self.distribution.max_degree(),
                self.m
            )));
        }
        Ok(())
    }
}

/// `m x g` precode: the identity on top of `m - g` dense random mixing rows
/// drawn from [`rng::PRECODE_STREAM`].
pub fn build_precode(params: &CodecParams) -> Result<Gf2Matrix> {
    params.validate()?;
    let mut rng = rng::stream(params.seed, rng::PRECODE_STREAM);
    let mixing = Gf2Matrix::random(params.m - params.g, params.g, &mut rng);
    Gf2Matrix::identity(params.g).vstack(&mixing)
}

/// Columns of LT row `esi`: a degree drawn from `dist`, then that many
/// distinct intermediate symbols, all from stream `esi`.
pub fn lt_row(m: usize, dist: &DegreeDistribution, seed: u64, esi: u64) -> Vec<usize> {
    let mut rng = rng::stream(seed, esi);
    let d = dist.sample(&mut rng).min(m);
    rng::distinct_indices(&mut rng, m, d)
}

/// `n x m` LT generator built from rows `0..n`.
pub fn lt_encode(m: usize, dist: &DegreeDistribution, n: usize, seed: u64) -> Result<Gf2Matrix> {
    if n == 0 {
        return Err(Error::params("LT encoding needs at least one row"));
    }
    if dist.max_degree() > m {
        return Err(Error::params("degree distribution exceeds intermediate symbol count"));
    }
    let mut out = Gf2Matrix::zeros(n, m);
    for r in 0..n {
        for c in lt_row(m, dist, seed, r as u64) {
            out.set(r, c, true);
        }
    }
    Ok(out)
}

/// Produces effective generator rows (width `g`) for any encoding index.
#[derive(Debug, Clone)]
pub struct RaptorGenerator {
    params: CodecParams,
    precode: Gf2Matrix,
}

impl RaptorGenerator {
    pub fn new(params: CodecParams) -> Result<Self> {
        let precode = build_precode(&params)?;
        Ok(RaptorGenerator { params, precode })
    }

    pub fn params(&self) -> &CodecParams {
        &self.params
    }

    pub fn precode(&self) -> &Gf2Matrix {
        &self.precode
    }

    /// Row `esi` of `G_LT * G_pre`.
    pub fn row(&self, esi: u64) -> Vec<u64> {
        let p = &self.params;
        let mut acc = vec![0u64; p.g.div_ceil(64)];
        for c in lt_row(p.m, &p.distribution, p.seed, esi) {
            for (a, w) in acc.iter_mut().zip(self.precode.row_words(c)) {
                *a ^= w;
            }
        }
        acc
    }

    pub fn rows(&self, esis: impl IntoIterator<Item = u64>) -> Gf2Matrix {
        let mut out = Gf2Matrix::zeros(0, self.params.g);
        for esi in esis {
            out.push_row(&self.row(esi)).expect("generator row width is g");
        }
        out
    }
}

/// One generation of `g` source packets of equal bit length.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceBlock {
    payloads: Gf2Matrix,
}

impl SourceBlock {
    /// `payloads` has one row per source packet; its width is the packet size
    /// in bits.
    pub fn new(payloads: Gf2Matrix) -> Result<Self> {
        if payloads.rows() == 0 {
            return Err(Error::params("a source block needs at least one packet"));
        }
        if payloads.cols() == 0 {
            return Err(Error::params("packets must carry at least one bit"));
        }
        Ok(SourceBlock { payloads })
    }

    /// Checks the block against the generation cap `B`.
    pub fn within_cap(self, max_block: usize) -> Result<Self> {
        if self.g() > max_block {
            return Err(Error::params(format!("block of {} packets exceeds cap {max_block}", self.g())));
        }
        Ok(self)
    }

    /// Pseudo-random payloads for simulation and tests.
    pub fn random(g: usize, packet_bits: usize, seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, rng::PRECODE_STREAM - 1);
        Self::new(Gf2Matrix::random(g, packet_bits, &mut rng))
    }

    pub fn g(&self) -> usize {
        self.payloads.rows()
    }

    pub fn packet_bits(&self) -> usize {
        self.payloads.cols()
    }

    pub fn payloads(&self) -> &Gf2Matrix {
        &self.payloads
    }
}

/// Coded packets of one generation with their effective generator rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CodedBlock {
    pub block_id: u64,
    /// Encoding index of each packet.
    pub esi: Vec<u64>,
    /// `n x packet_bits` coded payloads.
    pub packets: Gf2Matrix,
    /// `n x g` rows of `G_LT * G_pre`.
    pub generator_rows: Gf2Matrix,
}

impl CodedBlock {
    pub fn len(&self) -> usize {
        self.esi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.esi.is_empty()
    }

    pub fn g(&self) -> usize {
        self.generator_rows.cols()
    }

    /// Sub-block of the packets at positions `idx` (e.g. the survivors of an
    /// erasure channel).
    pub fn select(&self, idx: &[usize]) -> CodedBlock {
        CodedBlock {
            block_id: self.block_id,
            esi: idx.iter().map(|&i| self.esi[i]).collect(),
            packets: self.packets.select_rows(idx),
            generator_rows: self.generator_rows.select_rows(idx),
        }
    }

    pub fn append(&mut self, other: &CodedBlock) -> Result<()> {
        if other.g() != self.g() || other.packets.cols() != self.packets.cols() {
            return Err(Error::WidthMismatch {
                expected: self.g(),
                found: other.g(),
            });
        }
        self.esi.extend_from_slice(&other.esi);
        self.packets = self.packets.vstack(&other.packets)?;
        self.generator_rows = self.generator_rows.vstack(&other.generator_rows)?;
        Ok(())
    }

    /// True when every payload equals the GF(2) sum of the source payloads its
    /// generator row selects.
    pub fn is_consistent_with(&self, source: &SourceBlock) -> bool {
        match self.generator_rows.mul(source.payloads()) {
            Ok(expected) => expected == self.packets,
            Err(_) => false,
        }
    }
}

/// Encoder state kept alive in feedback mode to emit fix packets on request.
#[derive(Debug, Clone)]
pub struct FixPackets {
    generator: RaptorGenerator,
    source: SourceBlock,
    block_id: u64,
    emitted: u64,
}

impl FixPackets {
    /// Next fix packet, a fresh LT row from the reserved fix streams.
    pub fn next_packet(&mut self) -> CodedBlock {
        let esi = rng::FIX_STREAM_BASE + self.emitted;
        self.emitted += 1;
        encode_rows(&self.generator, &self.source, self.block_id, vec![esi])
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }
}

#[derive(Debug, Clone)]
pub struct Encoding {
    pub coded: CodedBlock,
    /// Present only when the feedback window is positive.
    pub fix: Option<FixPackets>,
}

impl Encoding {
    /// Fix-packet source; fails in no-response mode.
    pub fn fix_packets(&mut self) -> Result<&mut FixPackets> {
        self.fix.as_mut().ok_or(Error::NoResponseMode)
    }
}

fn encode_rows(gen: &RaptorGenerator, source: &SourceBlock, block_id: u64, esi: Vec<u64>) -> CodedBlock {
    let generator_rows = gen.rows(esi.iter().copied());
    let packets = generator_rows
        .mul(source.payloads())
        .expect("generator width equals source count");
    CodedBlock {
        block_id,
        esi,
        packets,
        generator_rows,
    }
}

/// Encodes `n` packets (encoding indices `0..n`) of one generation.
pub fn raptor_encode(block: &SourceBlock, params: &CodecParams, n: usize) -> Result<Encoding> {
    if block.g() != params.g {
        return Err(Error::params(format!(
            "source block has {} packets but params expect {}",
            block.g(),
            params.g
        )));
    }
    if n == 0 {
        return Err(Error::params("at least one coded packet must be requested"));
    }
    let gen = RaptorGenerator::new(params.clone())?;
    Ok(encode_with(&gen, block, params.seed, n))
}

/// Same as [`raptor_encode`] with a prebuilt generator; `block_id` labels the
/// generation.
pub fn encode_with(gen: &RaptorGenerator, block: &SourceBlock, block_id: u64, n: usize) -> Encoding {
    let coded = encode_rows(gen, block, block_id, (0..n as u64).collect());
    let fix = (gen.params().feedback_window > 0).then(|| FixPackets {
        generator: gen.clone(),
        source: block.clone(),
        block_id,
        emitted: 0,
    });
    Encoding { coded, fix }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    fn params(g: usize, m: usize, seed: u64) -> CodecParams {
        let dist = DegreeDistribution::robust_soliton(m, 0.1, 0.5).unwrap();
        CodecParams::new(g, m, dist, seed).unwrap()
    }

    #[test]
    fn precode_without_mixing_is_identity() {
        assert_eq!(build_precode(&params(4, 4, 1)).unwrap(), Gf2Matrix::identity(4));
    }

    #[test]
    fn precode_has_full_column_rank() {
        let p = build_precode(&params(4, 6, 1)).unwrap();
        assert_eq!((p.rows(), p.cols()), (6, 4));
        assert_eq!(p.rank(), 4);
    }

    #[test]
    fn precode_mixing_block_follows_documented_stream() {
        // independent regeneration: one next_u64 per row (5 columns fit in a
        // word), least significant bit is column 0
        let p = build_precode(&params(5, 8, 7)).unwrap();
        let mut rng = rng::stream(7, rng::PRECODE_STREAM);
        for r in 0..3 {
            let word = rng.next_u64();
            for c in 0..5 {
                assert_eq!(p.get(5 + r, c), word >> c & 1 == 1, "row {r} col {c}");
            }
        }
    }

    #[test]
    fn m_below_g_is_rejected() {
        let dist = DegreeDistribution::robust_soliton(3, 0.1, 0.5).unwrap();
        assert!(matches!(CodecParams::new(4, 3, dist, 0), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn lt_rows_have_requested_weight() {
        let ones = lt_encode(10, &DegreeDistribution::point_mass(1), 1000, 3).unwrap();
        assert!((0..1000).all(|r| ones.row_weight(r) == 1));
        let two = lt_encode(10, &DegreeDistribution::point_mass(2), 1, 3).unwrap();
        assert_eq!(two.row_support(0).len(), 2);
        assert!(lt_encode(10, &DegreeDistribution::point_mass(1), 0, 3).is_err());
    }

    #[test]
    fn single_source_packet_is_repeated() {
        let p = params(1, 10, 4);
        let src = SourceBlock::random(1, 96, 2).unwrap();
        let enc = raptor_encode(&src, &p, 20).unwrap();
        for r in 0..20 {
            if enc.coded.generator_rows.row_weight(r) == 1 {
                assert_eq!(enc.coded.packets.row_words(r), src.payloads().row_words(0));
            } else {
                assert!(enc.coded.packets.row_words(r).iter().all(|&w| w == 0));
            }
        }
    }

    #[test]
    fn payloads_are_generator_times_source() {
        let p = params(4, 12, 11);
        let src = SourceBlock::random(4, 130, 5).unwrap();
        let enc = raptor_encode(&src, &p, 8).unwrap();
        // per-packet XOR of the selected source payloads
        for r in 0..8 {
            let mut acc = vec![0u64; 3];
            for c in enc.coded.generator_rows.row_support(r) {
                for (a, w) in acc.iter_mut().zip(src.payloads().row_words(c)) {
                    *a ^= w;
                }
            }
            assert_eq!(enc.coded.packets.row_words(r), &acc[..]);
        }
        assert!(enc.coded.is_consistent_with(&src));
    }

    #[test]
    fn generator_rows_equal_lt_times_precode() {
        let p = params(6, 30, 2);
        let gen = RaptorGenerator::new(p.clone()).unwrap();
        let lt = lt_encode(p.m, &p.distribution, 15, p.seed).unwrap();
        assert_eq!(gen.rows(0..15), lt.mul(gen.precode()).unwrap());
    }

    #[test]
    fn encoding_is_deterministic_and_prefix_stable() {
        let p = params(8, 40, 99);
        let src = SourceBlock::random(8, 64, 1).unwrap();
        let a = raptor_encode(&src, &p, 12).unwrap().coded;
        let b = raptor_encode(&src, &p, 12).unwrap().coded;
        assert_eq!(a, b);
        let longer = raptor_encode(&src, &p, 20).unwrap().coded;
        assert_eq!(longer.select(&(0..12).collect::<Vec<_>>()), a);
    }

    #[test]
    fn fix_packets_only_in_feedback_mode() {
        let src = SourceBlock::random(5, 64, 1).unwrap();
        let mut quiet = raptor_encode(&src, &params(5, 50, 3), 5).unwrap();
        assert!(matches!(quiet.fix_packets(), Err(Error::NoResponseMode)));
        let p = params(5, 50, 3).with_feedback_window(2);
        let mut enc = raptor_encode(&src, &p, 5).unwrap();
        let fix = enc.fix_packets().unwrap();
        let a = fix.next_packet();
        let b = fix.next_packet();
        assert_ne!(a.esi, b.esi);
        assert!(a.esi[0] >= rng::FIX_STREAM_BASE);
        enc.coded.append(&a).unwrap();
        assert_eq!(enc.coded.len(), 6);
        assert!(enc.coded.is_consistent_with(&src));
    }

    #[test]
    fn block_size_is_checked() {
        let src = SourceBlock::random(5, 8, 1).unwrap();
        assert!(raptor_encode(&src, &params(4, 8, 0), 3).is_err());
        assert!(src.clone().within_cap(4).is_err());
        assert!(src.within_cap(5).is_ok());
    }
}
