use aniso_ebm::data::{decode_binary, encode_binary, read_dataset, rings_generator, write_dataset, Dataset};

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x < 3.0 {
        let mut term = x;
        let mut sum = x;
        let mut k = 0.0;
        while term.abs() > 1e-17 * sum.abs() {
            k += 1.0;
            term *= -x * x / k;
            sum += term / (2.0 * k + 1.0);
        }
        sum * 2.0 / std::f64::consts::PI.sqrt()
    } else {
        // Lentz continued fraction for erfc.
        let mut f = x;
        let mut c = x;
        let mut d = 0.0;
        for n in 1..200 {
            let a = n as f64 / 2.0;
            d = 1.0 / (x + a * d);
            c = x + a / c;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        1.0 - (-x * x).exp() / (f * std::f64::consts::PI.sqrt())
    }
}

#[test]
fn erf_oracle_matches_table() {
    assert!((erf(0.5) - 0.520_499_877_813_046_5).abs() < 1e-14);
    assert!((erf(1.0) - 0.842_700_792_949_714_9).abs() < 1e-14);
    assert!((erf(3.5) - 0.999_999_256_901_628).abs() < 1e-13);
}

#[test]
fn ring_radii_pass_kolmogorov_smirnov() {
    let radii = [1.0, 2.0, 3.0];
    let w = 0.1;
    let ds = rings_generator(30_000, &radii, w, 17).unwrap();
    for &rj in &radii {
        let mut r: Vec<f64> = ds
            .iter()
            .map(|p| (p[0] * p[0] + p[1] * p[1]).sqrt())
            .filter(|r| (r - rj).abs() < 0.5)
            .collect();
        r.sort_by(f64::total_cmp);
        let n = r.len() as f64;
        let d = r
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = normal_cdf((x - rj) / w);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        let crit = 1.628 / n.sqrt();
        assert!(d < crit, "ring {rj}: D = {d}, critical {crit}");
    }
}

#[test]
fn empty_dataset_round_trips() {
    let ds = Dataset::new(3, vec![]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for name in ["e.csv", "e.bin"] {
        let p = dir.path().join(name);
        write_dataset(&p, &ds).unwrap();
        let back = read_dataset(&p).unwrap();
        assert_eq!(back.len(), 0);
        assert_eq!(back.dim(), 3);
    }
}

#[test]
fn known_binary_bytes_parse() {
    let mut bytes = b"ANIDS1".to_vec();
    bytes.extend_from_slice(&1u32.to_le_bytes());
    bytes.extend_from_slice(&2u32.to_le_bytes());
    bytes.extend_from_slice(&0.5f64.to_le_bytes());
    bytes.extend_from_slice(&(-3.25f64).to_le_bytes());
    let ds = decode_binary(&bytes).unwrap();
    assert_eq!(ds.rows(), &[0.5, -3.25]);
    assert_eq!(encode_binary(&ds), bytes);
}
