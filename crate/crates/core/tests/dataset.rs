mod common;

use common::invariants::{check_sequence, check_stream, split_summary};
use common::{real_data, synthetic_data};
use proptest::prelude::*;
use vln::data::export::{grid_size, prediction_grid, quantize, read_dump, write_dump};
use vln::data::split::class_quotas;
use vln::data::{
    generate_sequence, stratified_split, DigitTrajectory, KeyedRng, Purpose, StreamKey, StreamKind, POSITION_LIMIT,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn trajectories_stay_in_frame_at_constant_speed(
        x in 0.0..=POSITION_LIMIT, y in 0.0..=POSITION_LIMIT,
        theta in 0.0..std::f64::consts::TAU, speed in 2.0f64..5.0, steps in 1usize..200,
    ) {
        let mut t = DigitTrajectory { x, y, vx: speed * theta.cos(), vy: speed * theta.sin() };
        for _ in 0..steps {
            let before = (t.vx.abs(), t.vy.abs());
            t.advance(POSITION_LIMIT);
            prop_assert!((0.0..=POSITION_LIMIT).contains(&t.x) && (0.0..=POSITION_LIMIT).contains(&t.y));
            prop_assert_eq!((t.vx.abs(), t.vy.abs()), before);
            prop_assert!((t.speed() - speed).abs() < 1e-12);
        }
    }

    #[test]
    fn synthetic_sequences_satisfy_invariants(seed in 0u64..1000, index in 0u64..10_000, epoch in 0u64..5) {
        let data = synthetic_data(3);
        let key = StreamKey { seed, purpose: Purpose::Train, epoch, index };
        let seq = generate_sequence(&data.train, key).unwrap();
        prop_assert_eq!(check_sequence(&seq, &data.train), Ok(()));
        prop_assert_eq!(generate_sequence(&data.train, key).unwrap(), seq);
    }

    #[test]
    fn keyed_draws_are_in_range(seed in any::<u64>(), index in any::<u64>(), n in 1usize..100_000) {
        let mut r = KeyedRng::new(StreamKey { seed, purpose: Purpose::Test, epoch: 0, index });
        for _ in 0..32 {
            let u = r.uniform();
            prop_assert!((0.0..1.0).contains(&u));
            prop_assert!(r.index(n) < n);
        }
    }

    #[test]
    fn stratified_split_honours_quotas(
        sizes in prop::collection::vec(1usize..300, 2..12), seed in any::<u64>(), fraction in 0.0f64..=1.0,
    ) {
        let labels: Vec<u8> = sizes.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c as u8, n)).collect();
        let split = stratified_split(&labels, sizes.len(), fraction, seed).unwrap();
        let total: usize = sizes.iter().sum();
        prop_assert_eq!(split.validation.len(), (fraction * total as f64).round() as usize);
        prop_assert_eq!(split.train.len() + split.validation.len(), total);
        let quotas = class_quotas(&sizes, fraction);
        for (c, &n) in sizes.iter().enumerate() {
            let v = split.validation.iter().filter(|&&i| labels[i] as usize == c).count();
            prop_assert_eq!(v, quotas[c]);
            prop_assert!((v as f64 - fraction * n as f64).abs() <= 1.0);
        }
        let mut all: Vec<usize> = split.train.iter().chain(&split.validation).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..total).collect::<Vec<_>>());
    }
}

#[test]
fn streams_are_disjoint_by_purpose_and_epoch() {
    let data = synthetic_data(4);
    let a = data.sequence(StreamKind::Train, 0, 5).unwrap();
    let b = data.sequence(StreamKind::Train, 1, 5).unwrap();
    let c = data.sequence(StreamKind::Validation, 0, 5).unwrap();
    assert_ne!(a.frames, b.frames);
    assert_ne!(a.key, c.key);
    assert_eq!(
        data.sequence(StreamKind::Test, 0, 9).unwrap(),
        data.sequence(StreamKind::Test, 7, 9).unwrap()
    );
}

#[test]
fn dump_round_trips_quantized_frames() {
    let data = synthetic_data(5);
    let seqs: Vec<_> = data
        .epoch_stream(StreamKind::Test, 0, 3)
        .collect::<Result<_, _>>()
        .unwrap();
    let mut buf = Vec::new();
    write_dump(&mut buf, &seqs).unwrap();
    assert_eq!(buf.len(), 16 + 3 * 20 * 64 * 64);
    let back = read_dump(&buf[..]).unwrap();
    for (s, b) in seqs.iter().zip(&back) {
        for (&v, &q) in s.frames.iter().zip(b) {
            assert_eq!(quantize(q), quantize(v));
        }
    }
    assert!(read_dump(&buf[..buf.len() - 1]).is_err());
}

#[test]
fn prediction_grid_has_documented_size() {
    assert_eq!(grid_size(2, 20), (1322, 134));
    let data = synthetic_data(6);
    let s = data.sequence(StreamKind::Test, 0, 0).unwrap();
    let preds: Vec<Vec<f32>> = s.future().map(|f| f.to_vec()).collect();
    let img = prediction_grid(&s, Some(&preds)).unwrap();
    assert_eq!(img.dimensions(), (1322, 134));
    // Outer margin is white.
    assert!(img.get_pixel(0, 0).0[0] == 255 && img.get_pixel(1321, 133).0[0] == 255);
}

#[test]
fn mnist_sequences_satisfy_invariants() {
    let Some(data) = real_data(0) else { return };
    check_stream(&data, StreamKind::Train, 0, 300).unwrap();
    check_stream(&data, StreamKind::Validation, 2, 100).unwrap();
    check_stream(&data, StreamKind::Test, 0, 100).unwrap();
}

#[test]
fn mnist_split_is_stratified() {
    let Some(data) = real_data(0) else { return };
    let (train, val, pct) = split_summary(&data);
    assert_eq!((train, val), (48_000, 12_000));
    assert!(pct.iter().all(|p| (p - 20.0).abs() <= 1.0), "{pct:?}");
    assert_eq!(data.test.len(), 10_000);
}
