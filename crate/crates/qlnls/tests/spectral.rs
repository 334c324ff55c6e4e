use std::f64::consts::{PI, SQRT_2};

use proptest::prelude::*;
use qlnls::sampling::{band_limited, band_limited_real, rng};
use qlnls::spectral::io::{read_snapshot, write_snapshot};
use qlnls::spectral::smoothing::{block_constant, block_count, smoothing_constant};
use qlnls::spectral::{
    block_r, bold_l2, c_inverse, c_transform, fourier_multiplier, l2, smooth_s, sobolev_norm,
    symplectic_w, BoldField, Field, Grid, Pair, SobolevIndex, TimeGrid, Traj,
};
use qlnls::{Error, C64};

fn grid(n: usize) -> Grid {
    Grid::new(n).unwrap()
}

fn quad_l2(u: &Field) -> f64 {
    let s: f64 = u.values().iter().map(|v| v.norm_sqr()).sum();
    (s * u.grid().dx() / (2.0 * PI)).sqrt()
}

#[test]
fn grid_rejects_small_or_odd() {
    assert!(Grid::new(6).is_err());
    assert!(Grid::new(63).is_err());
    let g = grid(8);
    let x = g.nodes();
    assert!(x.windows(2).all(|w| (w[1] - w[0] - g.dx()).abs() < 1e-15));
    assert_eq!(x[0], 0.0);
}

#[test]
fn sobolev_norm_examples() {
    let g = grid(32);
    let e = Field::mode(&g, 1, C64::new(1.0, 0.0));
    assert!((e.sobolev_norm(1.0) - SQRT_2).abs() < 1e-14);
    let c = Field::constant(&g, C64::new(-3.0, 4.0));
    for s in [0.0, 1.5, 4.0] {
        assert!((c.sobolev_norm(s) - 5.0).abs() < 1e-13);
    }
    let s = SobolevIndex::new(1.0).unwrap();
    assert!((sobolev_norm(&e, s) - SQRT_2).abs() < 1e-14);
    assert!(SobolevIndex::new(-0.5).is_err());
}

#[test]
fn sobolev_zero_matches_quadrature() {
    let g = grid(128);
    let mut r = rng(3);
    for _ in 0..10 {
        let u = band_limited(&g, 30, 0.5, 1.0, &mut r);
        let q = quad_l2(&u);
        assert!((u.sobolev_norm(0.0) - q).abs() <= 1e-12 * q);
    }
}

#[test]
fn multiplier_examples() {
    let g = grid(32);
    let e = Field::mode(&g, 1, C64::new(1.0, 0.0));
    let d = e.dx();
    let want = Field::mode(&g, 1, C64::new(0.0, 1.0));
    assert!((&d - &want).sup_norm() < 1e-14);
    let one = Field::constant(&g, C64::new(1.0, 0.0));
    assert!(one.dx_inv().sup_norm() < 1e-15);
    let mut r = rng(1);
    let u = band_limited(&g, 10, 1.0, 1.0, &mut r);
    assert!((&u.lambda(0.0) - &u).sup_norm() < 1e-14);
    assert!(fourier_multiplier(|k| C64::new(1.0 / k, 0.0), &u).is_err());
}

#[test]
fn smoothing_examples() {
    let g = grid(64);
    let e3 = Field::mode(&g, 3, C64::new(1.0, 0.0));
    assert!(smooth_s(0, &e3).sup_norm() == 0.0);
    let mut r = rng(2);
    let u = band_limited(&g, 31, 0.2, 1.0, &mut r);
    assert!((&smooth_s(5, &u) - &u).sup_norm() < 1e-15);
    assert!((&block_r(0, &u) - &smooth_s(1, &u)).sup_norm() == 0.0);
    for a in [0.0, 1.0, 2.0] {
        let lhs = u.sobolev_norm(a).powi(2);
        let rhs: f64 = (0..=block_count(64)).map(|j| block_r(j, &u).sobolev_norm(a).powi(2)).sum();
        assert!(lhs <= 2.0 * rhs);
    }
}

#[test]
fn block_constant_is_attained() {
    let g = grid(64);
    // R_0 holds |k| <= 2, where the bracket ratio peaks at 5^{1/2} per unit order.
    let e2 = Field::mode(&g, 2, C64::new(1.0, 0.0));
    let r0 = block_r(0, &e2);
    let ratio = r0.sobolev_norm(1.0) / r0.sobolev_norm(0.0);
    assert!((ratio - block_constant(0.0, 1.0)).abs() < 1e-13);
    assert!(smoothing_constant(3.0) == 8.0);
}

#[test]
fn c_transform_examples() {
    let g = grid(16);
    let real = |v: f64| Field::constant(&g, C64::new(v, 0.0));
    let h = c_transform(&Pair::new(real(SQRT_2), real(0.0)).unwrap()).unwrap();
    assert!((&h.u - &real(1.0)).sup_norm() < 1e-15);
    let h = c_transform(&Pair::new(real(0.0), real(SQRT_2)).unwrap()).unwrap();
    assert!((&h.u - &Field::constant(&g, C64::new(0.0, 1.0))).sup_norm() < 1e-15);
    let bad = Pair { u1: Field::constant(&g, C64::new(0.0, 1.0)), u2: real(0.0) };
    assert!(matches!(c_transform(&bad), Err(Error::NotReal(_))));
}

#[test]
fn inner_product_examples() {
    let g = grid(32);
    let e = Field::mode(&g, 1, C64::new(1.0, 0.0));
    assert!((l2(&e, &e).unwrap() - C64::new(2.0 * PI, 0.0)).norm() < 1e-13);
    let mut r = rng(5);
    let u = band_limited(&g, 8, 1.0, 1.0, &mut r);
    let v = band_limited(&g, 8, 1.0, 1.0, &mut r);
    assert!(symplectic_w(&u, &u).unwrap().abs() < 1e-12);
    // i int (u conj v - conj u v) by explicit node sums
    let oracle: C64 = u
        .values()
        .iter()
        .zip(v.values())
        .map(|(a, b)| C64::i() * (a * b.conj() - a.conj() * b))
        .sum::<C64>()
        * g.dx();
    let w = symplectic_w(&u, &v).unwrap();
    assert!(oracle.im.abs() < 1e-12);
    assert!((w - oracle.re).abs() < 1e-12);
    assert!((symplectic_w(&v, &u).unwrap() + w).abs() < 1e-12);
    assert!(matches!(l2(&u, &Field::zeros(&grid(16))), Err(Error::GridMismatch(32, 16))));
}

#[test]
fn snapshot_roundtrip_and_layout() {
    let g = grid(8);
    let mut r = rng(9);
    let fields = vec![band_limited(&g, 3, 1.0, 1.0, &mut r), band_limited(&g, 3, 1.0, 1.0, &mut r)];
    let mut buf = Vec::new();
    write_snapshot(&mut buf, &fields).unwrap();
    assert_eq!(&buf[..4], b"NLSF");
    assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
    assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 8);
    assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 2);
    assert_eq!(buf.len(), 16 + 2 * 8 * 16);
    let re0 = f64::from_le_bytes(buf[16..24].try_into().unwrap());
    assert_eq!(re0, fields[0].coeffs()[0].re);
    let back = read_snapshot(&buf[..]).unwrap();
    for (a, b) in fields.iter().zip(&back) {
        assert!((a - b).sup_norm() < 1e-15);
    }
    let mut bad = buf.clone();
    bad[0] = b'X';
    assert!(read_snapshot(&bad[..]).is_err());
}

#[test]
fn traj_invariants() {
    let times = TimeGrid::new(2.0, 9).unwrap();
    assert_eq!(times.t(0), 0.0);
    assert_eq!(times.t(8), 2.0);
    assert!(TimeGrid::new(1.0, 1).is_err());
    let g = grid(8);
    assert!(Traj::new(times, vec![Field::zeros(&g); 3]).is_err());
}

#[test]
fn fft_roundtrip_all_sizes() {
    let mut r = rng(11);
    let mut n = 8;
    while n <= 1024 {
        let g = grid(n);
        let u = band_limited(&g, n as i64 / 2 - 1, 0.0, 1.0, &mut r);
        let back = Field::from_values(&g, g.inverse(&g.forward(u.values())));
        assert!((&back - &u).sup_norm() <= 1e-12 * u.sup_norm(), "n = {n}");
        n *= 2;
    }
}

fn arb_field(n: usize) -> impl Strategy<Value = Field> {
    (any::<u64>(), 1i64..(n as i64 / 2 - 1)).prop_map(move |(seed, kmax)| {
        let mut r = rng(seed);
        band_limited(&Grid::new(n).unwrap(), kmax, 0.3, 1.0, &mut r)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parseval(u in arb_field(64)) {
        let q = quad_l2(&u);
        prop_assert!((u.l2_norm() - q).abs() <= 1e-12 * q);
    }

    #[test]
    fn smoothing_axioms(u in arb_field(128), j in 0u32..6, a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let sj = smooth_s(j, &u);
        let rest = &u - &sj;
        let rj = block_r(j, &u);
        let p = 2f64.powi(j as i32);
        let slack = 1.0 + 1e-12;
        prop_assert!(sj.sobolev_norm(a) <= u.sobolev_norm(a) * slack);
        if a < b {
            prop_assert!(sj.sobolev_norm(b) <= p.powf(b - a) * smoothing_constant(b) * sj.sobolev_norm(a) * slack);
        }
        if a > b {
            prop_assert!(rest.sobolev_norm(b) <= p.powf(b - a) * rest.sobolev_norm(a) * slack + 1e-300);
        }
        prop_assert!(rj.sobolev_norm(b) <= p.powf(b - a) * block_constant(a, b) * rj.sobolev_norm(a) * slack + 1e-300);
    }

    #[test]
    fn block_orthogonality(u in arb_field(128), a in 0.0f64..4.0) {
        let sum: f64 = (0..=block_count(128)).map(|j| block_r(j, &u).sobolev_norm(a).powi(2)).sum();
        let tot = u.sobolev_norm(a).powi(2);
        prop_assert!((sum - tot).abs() <= 1e-12 * tot);
    }

    #[test]
    fn c_transform_is_unitary(seed in any::<u64>()) {
        let g = Grid::new(64).unwrap();
        let mut r = rng(seed);
        let p = Pair::new(band_limited_real(&g, 10, 1.0, 1.0, &mut r), band_limited_real(&g, 10, 1.0, 1.0, &mut r)).unwrap();
        let q = Pair::new(band_limited_real(&g, 10, 1.0, 1.0, &mut r), band_limited_real(&g, 10, 1.0, 1.0, &mut r)).unwrap();
        let (hp, hq) = (c_transform(&p).unwrap(), c_transform(&q).unwrap());
        let real = p.real_l2(&q).unwrap();
        let bold = bold_l2(&hp.u, &hq.u).unwrap();
        prop_assert!((real - bold).abs() <= 1e-12 * (1.0 + real.abs()));
        let back = c_inverse(&hp);
        prop_assert!((&back.u1 - &p.u1).sup_norm() < 1e-13);
        prop_assert!((&back.u2 - &p.u2).sup_norm() < 1e-13);
        let again = c_transform(&c_inverse(&BoldField::new(hp.u.clone()))).unwrap();
        prop_assert!((&again.u - &hp.u).sup_norm() < 1e-14);
    }
}
