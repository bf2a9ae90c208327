//! Raptor fountain coding over GF(2).
//!
//! A generation of `g` source packets is first expanded to `m` intermediate
//! symbols by the precode `[I_g ; R]`, where `R` is a seeded dense random
//! block. Each coded packet then XORs `d` distinct intermediate symbols, `d`
//! drawn from a [`DegreeDistribution`]. The receiver and any eavesdropper only
//! ever see the composed width-`g` rows.

mod decode;
mod degree;
mod raptor;

pub use decode::{curve_from_rows, decode_curve, ml_decode, recoverable_count, write_curve_csv, CurvePoint, DecodeResult};
pub use degree::DegreeDistribution;
pub use raptor::{
    build_precode, encode_with, lt_encode, lt_row, raptor_encode, CodecParams, CodedBlock, Encoding, FixPackets,
    RaptorGenerator, SourceBlock, DEFAULT_EXPANSION, DEFAULT_SOLITON_C, DEFAULT_SOLITON_DELTA,
};
