//! Frequency response of the second-order filters that feed the regression,
//! measured on sampled sinusoids against `lambda^2/(s+lambda)^2` times `1`,
//! `s` and `s^2`.

use num_complex::Complex64;
use sgobs::adapobs::filters::STENCIL;
use sgobs::adapobs::{FilterBank, FilterStates};

fn main() {
    let (lambda, h) = (10.0, 0.02);
    let bank = FilterBank::new(lambda, h);
    println!("{:>7} {:>12} {:>12} {:>12}", "w", "|F| meas", "|F| exact", "|Fs2| meas");
    for w in [0.5, 2.0, 5.0, 10.0, 20.0] {
        let mut st = FilterStates::default();
        let (mut peak_f, mut peak_fs2) = (0.0f64, 0.0f64);
        let n = (30.0 / h) as usize;
        for j in 0..n {
            let t = j as f64 * h;
            if t > 15.0 {
                peak_f = peak_f.max(bank.f(st.x1).abs());
                peak_fs2 = peak_fs2.max(bank.fs2(st.x1, (w * t).sin()).abs());
            }
            let s = STENCIL.map(|k| (w * (t + k as f64 * h)).sin());
            st = bank.advance(&st, &s, &s);
        }
        let g = lambda * lambda / (Complex64::new(lambda, w) * Complex64::new(lambda, w));
        println!("{w:7.2} {peak_f:12.6} {:12.6} {peak_fs2:12.6}", g.norm());
    }
}
