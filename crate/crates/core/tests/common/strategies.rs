//! Fuzzed values for the file formats and their round-trip checks.

use nclab::collapse::{read_ncf1, write_ncf1, FeatureMatrix};
use nclab::data::{parse_idx, serialize_idx, IdxData, IdxTensor, Split};
use nclab::harness::{decode_checkpoint, encode_checkpoint, Checkpoint, CheckpointError};
use nclab::network::{LrSchedule, MlpArchitecture, NetworkParams, OptimizerState};
use nclab::numerics::Matrix;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub fn cfg() -> ProptestConfig {
    ProptestConfig {
        cases: 1000,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

pub fn finite_f32() -> impl Strategy<Value = f32> {
    any::<u32>().prop_map(f32::from_bits).prop_filter("finite", |v| v.is_finite())
}

pub fn idx_tensor() -> impl Strategy<Value = IdxTensor> {
    (prop::collection::vec(0usize..5, 1..=4), 0u8..6).prop_flat_map(|(dims, kind)| {
        let len: usize = dims.iter().product();
        let data = match kind {
            0 => prop::collection::vec(any::<u8>(), len).prop_map(IdxData::U8).boxed(),
            1 => prop::collection::vec(any::<i8>(), len).prop_map(IdxData::I8).boxed(),
            2 => prop::collection::vec(any::<i16>(), len).prop_map(IdxData::I16).boxed(),
            3 => prop::collection::vec(any::<i32>(), len).prop_map(IdxData::I32).boxed(),
            4 => prop::collection::vec(finite_f32(), len).prop_map(IdxData::F32).boxed(),
            _ => prop::collection::vec(any::<u64>().prop_map(f64::from_bits).prop_filter("finite", |v| v.is_finite()), len)
                .prop_map(IdxData::F64)
                .boxed(),
        };
        data.prop_map(move |data| IdxTensor { dims: dims.clone(), data })
    })
}

pub fn feature_matrix() -> impl Strategy<Value = FeatureMatrix> {
    (0usize..20, 1usize..9, 1usize..6, any::<u32>(), any::<u64>()).prop_flat_map(|(n, d, k, layer, it)| {
        (
            prop::collection::vec(finite_f32(), n * d),
            prop::collection::vec(0..k, n),
        )
            .prop_map(move |(x, y)| {
                FeatureMatrix::new(Matrix::from_vec(n, d, x).unwrap(), y, k, layer, it, Split::Test).unwrap()
            })
    })
}

fn params_for(arch: &MlpArchitecture, values: &[f32]) -> NetworkParams<f32> {
    let mut p = NetworkParams::zeros(arch);
    let mut it = values.iter().cycle();
    for l in &mut p.layers {
        for v in l.weights.as_mut_slice().iter_mut().chain(l.bias.as_mut_slice()) {
            *v = *it.next().unwrap();
        }
    }
    p
}

pub fn checkpoint() -> impl Strategy<Value = Checkpoint> {
    (
        1usize..6,
        prop::collection::vec(1usize..6, 0..4),
        2usize..5,
        prop::collection::vec(finite_f32(), 1..40),
        prop::collection::vec(finite_f32(), 1..40),
        any::<u64>(),
        (0.0f64..1.0, 0.0f64..1.0, any::<bool>(), any::<u64>()),
        any::<[u8; 32]>(),
    )
        .prop_map(|(input, hidden, k, pv, vv, iteration, (momentum, lr, cosine, t_max), hash)| {
            let arch = MlpArchitecture::new(input, hidden, k).unwrap();
            let params = params_for(&arch, &pv);
            let mut optimizer = OptimizerState::new(&params, momentum, lr, t_max)
                .unwrap()
                .with_schedule(if cosine { LrSchedule::Cosine } else { LrSchedule::Constant });
            optimizer.velocity = params_for(&arch, &vv);
            optimizer.t = iteration;
            Checkpoint { iteration, params, optimizer, config_hash: hash }
        })
}

pub fn check_idx(t: &IdxTensor) -> Result<(), TestCaseError> {
    let bytes = serialize_idx(t).unwrap();
    prop_assert_eq!(&parse_idx(&bytes).unwrap(), t);
    prop_assert!(parse_idx(&bytes[..bytes.len() - 1]).is_err());
    Ok(())
}

pub fn check_ncf1(fm: &FeatureMatrix) -> Result<(), TestCaseError> {
    let bytes = write_ncf1(fm);
    prop_assert_eq!(&read_ncf1(&bytes, Split::Test).unwrap(), fm);
    prop_assert!(read_ncf1(&bytes[..bytes.len() - 1], Split::Test).is_err());
    Ok(())
}

/// Round trip, plus detection of one corrupted byte at `flip`, truncation and a foreign config hash.
pub fn check_ncck(c: &Checkpoint, flip: prop::sample::Index) -> Result<(), TestCaseError> {
    let bytes = encode_checkpoint(c);
    prop_assert_eq!(&decode_checkpoint(&bytes, Some(&c.config_hash)).unwrap(), c);
    let mut bad = bytes.clone();
    let i = flip.index(bad.len());
    bad[i] ^= 0x5a;
    prop_assert!(decode_checkpoint(&bad, None).is_err());
    prop_assert!(decode_checkpoint(&bytes[..bytes.len() - 1], None).is_err());
    let mut other = c.config_hash;
    other[0] ^= 1;
    let mismatch = matches!(decode_checkpoint(&bytes, Some(&other)), Err(CheckpointError::HashMismatch { .. }));
    prop_assert!(mismatch);
    Ok(())
}
