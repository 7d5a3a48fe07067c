use proptest::prelude::*;

use spokenet::config::ExperimentConfig;
use spokenet::tensor::{Dtype, NamedTensor, TensorFile};

fn dtype() -> impl Strategy<Value = Dtype> {
    prop_oneof![Just(Dtype::F32), Just(Dtype::F64), Just(Dtype::Complex32), Just(Dtype::Complex64)]
}

fn tensor() -> impl Strategy<Value = NamedTensor> {
    ("[a-z.0-9]{0,12}", dtype(), prop::collection::vec(0usize..4, 0..4)).prop_flat_map(|(name, dtype, dims)| {
        let n: usize = dims.iter().product::<usize>() * if matches!(dtype, Dtype::Complex32 | Dtype::Complex64) { 2 } else { 1 };
        prop::collection::vec(any::<f64>(), n).prop_map(move |values| NamedTensor { name: name.clone(), dtype, dims: dims.clone(), values })
    })
}

proptest! {
    #[test]
    fn tensor_files_round_trip_bit_exactly(tensors in prop::collection::vec(tensor(), 0..5)) {
        let bytes = TensorFile { tensors }.encode().unwrap();
        let back = TensorFile::decode(&bytes).unwrap();
        prop_assert_eq!(back.encode().unwrap(), bytes);
    }

    #[test]
    fn any_flipped_bit_is_rejected(tensors in prop::collection::vec(tensor(), 1..3), pos in any::<prop::sample::Index>(), bit in 0u8..8) {
        let mut bytes = TensorFile { tensors }.encode().unwrap();
        let i = pos.index(bytes.len());
        bytes[i] ^= 1 << bit;
        prop_assert!(TensorFile::decode(&bytes).is_err());
    }

    #[test]
    fn configs_round_trip(seed in any::<u64>(), tv in 0.0f64..1.0, lr in 1e-7f64..1.0, rank in 1usize..12, snr in -10.0f64..60.0, blob_shift in -20.0f64..20.0) {
        let mut cfg = ExperimentConfig::default();
        cfg.seed = seed;
        cfg.grasp.tv_weight = tv;
        cfg.recon.finetune_lr = lr;
        cfg.recon.rank = rank;
        cfg.snr_db = snr;
        cfg.phantom.blobs[2].center_x.mean = blob_shift;
        let text = cfg.to_text();
        let back = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_text(), text);
    }
}
