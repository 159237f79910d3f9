use proptest::prelude::*;
use rand::Rng;
use tkz::apps::{
    conv2_circular, gen_lowrank_tensor_problem, gen_sparse_problem, image_to_tensor, kernel_to_tensor, psnr, read_pgm,
    write_pgm, Image, PgmFormat,
};
use tkz::random::{gaussian, seeded_rng};
use tkz::{tprod_fft, tprod_naive, Matrix};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn deconvolution_operator_is_circular_convolution(
        (m2, n2, m1, n1) in (1..=8usize, 1..=8usize, 1..=16usize, 1..=16usize),
        seed in 0u64..10_000,
    ) {
        let mut rng = seeded_rng(seed);
        let h = Matrix::from_fn(m2, n2, |_, _| gaussian(&mut rng));
        let (m, n) = (m1 + m2 - 1, n1 + n2 - 1);
        let x = Matrix::from_fn(m, n, |i, j| if i < m1 && j < n1 { rng.random::<f64>() } else { 0.0 });
        let direct = conv2_circular(&h, &x).unwrap();
        let via = tprod_fft(&kernel_to_tensor(&h, m1, n1).unwrap(), &image_to_tensor(&x)).unwrap();
        prop_assert!(via.sub(&image_to_tensor(&direct)).unwrap().fro_norm() <= 1e-10 * (1.0 + direct.norm()));
    }

    #[test]
    fn pgm_round_trips_bit_exactly(
        (h, w) in (1..=12usize, 1..=12usize),
        deep in any::<bool>(),
        plain in any::<bool>(),
        seed in 0u64..10_000,
    ) {
        let maxval: u16 = if deep { 65535 } else { 255 };
        let mut rng = seeded_rng(seed);
        let img = Image::from_fn(h, w, maxval as f64, |_, _| rng.random_range(0..=maxval) as f64).unwrap();
        let fmt = if plain { PgmFormat::Plain } else { PgmFormat::Binary };
        let mut buf = Vec::new();
        write_pgm(&img, maxval, fmt, &mut buf).unwrap();
        let back = read_pgm(buf.as_slice()).unwrap();
        prop_assert_eq!(back.pixels(), img.pixels());
        prop_assert_eq!(back.i_max(), img.i_max());
    }
}

#[test]
fn generated_right_hand_sides_are_consistent() {
    for seed in 0..5 {
        let p = gen_sparse_problem(12, 30, 5, seed).unwrap();
        let ax = &p.a * nalgebra::DVector::from_column_slice(&p.x);
        assert!(ax.iter().zip(&p.b).all(|(u, v)| (u - v).abs() <= 1e-12 * (1.0 + v.abs())));
        let t = gen_lowrank_tensor_problem(7, 4, 3, 5, 2, seed).unwrap();
        let naive = tprod_naive(&t.a, &t.x).unwrap();
        assert!(naive.sub(&t.b).unwrap().fro_norm() <= 1e-10 * naive.fro_norm());
    }
}

#[test]
fn psnr_falls_as_noise_grows() {
    for seed in 0..10 {
        let clean = Image::from_fn(24, 24, 1.0, |r, c| ((r * c) % 7) as f64 / 7.0).unwrap();
        let mut last = f64::INFINITY;
        for sigma in [0.01, 0.05, 0.2] {
            let mut rng = seeded_rng(seed);
            let noisy = Image::from_fn(24, 24, 1.0, |r, c| clean.get(r, c) + sigma * gaussian(&mut rng)).unwrap();
            let p = psnr(&noisy, &clean).unwrap();
            assert!(p < last, "seed {seed} sigma {sigma}: {p} !< {last}");
            last = p;
        }
    }
}
