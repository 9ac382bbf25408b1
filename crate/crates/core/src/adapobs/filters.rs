//! Exact discretization of the second-order filter bank under a polynomial
//! input hold.
//!
//! Between `t_j` and `t_{j+1}` the input is taken to be the quintic Lagrange
//! polynomial through samples `j-2 ..= j+3`. The filter state is then advanced
//! by the exact solution of the linear ODE for that input:
//! `x_{j+1} = Phi x_j + sum_s g_s u_{j+s}`.
//!
//! A zero-order hold is not used here on purpose: the bank contains a filter
//! with direct feedthrough (`lambda^2 s^2 / (s + lambda)^2`) next to strictly
//! proper ones, and a hold shifts the two parts against each other by half a
//! sample, which breaks the linear regression the bank is meant to produce.

use nalgebra::{DMatrix, Matrix2, Vector2};

/// Offsets of the interpolation stencil relative to the step start.
pub const STENCIL: [i32; 6] = [-2, -1, 0, 1, 2, 3];

/// Number of samples past `t_j` needed to advance the state from `t_j`.
pub const LOOKAHEAD: usize = 3;

/// Lagrange weights of the stencil evaluated at `sigma = (t - t_j) / h`.
pub fn lagrange_weights(sigma: f64) -> [f64; 6] {
    let mut w = [1.0; 6];
    for (i, wi) in w.iter_mut().enumerate() {
        let si = STENCIL[i] as f64;
        for &sm in STENCIL.iter() {
            let sm = sm as f64;
            if sm != si {
                *wi *= (sigma - sm) / (si - sm);
            }
        }
    }
    w
}

/// Interpolated value of the stencil samples at `sigma`.
pub fn interpolate(samples: &[f64; 6], sigma: f64) -> f64 {
    lagrange_weights(sigma).iter().zip(samples).map(|(w, u)| w * u).sum()
}

/// `x' = A x + B u` discretized for the polynomial hold at step `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyHold {
    pub phi: Matrix2<f64>,
    /// Weight of each stencil sample.
    pub gains: [Vector2<f64>; 6],
}

impl PolyHold {
    pub fn new(a: Matrix2<f64>, b: Vector2<f64>, h: f64) -> Self {
        const N: usize = 6;
        // augmented state [x; v_0 .. v_5], x' = A x + B v_0, v_m' = v_{m+1}
        // so that v_0(tau) = tau^n / n! when started from unit vector e_n
        let dim = 2 + N;
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        for r in 0..2 {
            for c in 0..2 {
                m[(r, c)] = a[(r, c)] * h;
            }
            m[(r, 2)] = b[r] * h;
        }
        for k in 0..N - 1 {
            m[(2 + k, 3 + k)] = h;
        }
        let e = m.exp();
        let phi = Matrix2::new(e[(0, 0)], e[(0, 1)], e[(1, 0)], e[(1, 1)]);

        // response to sigma^n = tau^n / h^n is n! / h^n times that to tau^n / n!
        let mut basis = [Vector2::zeros(); N];
        let mut fact = 1.0;
        for (n, g) in basis.iter_mut().enumerate() {
            if n > 0 {
                fact *= n as f64;
            }
            let scale = fact / h.powi(n as i32);
            *g = Vector2::new(e[(0, 2 + n)], e[(1, 2 + n)]) * scale;
        }

        // monomial coefficients c = V^-1 u with V[s][n] = s^n
        let v = DMatrix::from_fn(N, N, |s, n| (STENCIL[s] as f64).powi(n as i32));
        let vinv = v.try_inverse().expect("Vandermonde matrix of distinct nodes is invertible");
        let gains = std::array::from_fn(|s| (0..N).map(|n| basis[n] * vinv[(n, s)]).sum());
        Self { phi, gains }
    }

    pub fn advance(&self, x: Vector2<f64>, samples: &[f64; 6]) -> Vector2<f64> {
        let mut next = self.phi * x;
        for (g, u) in self.gains.iter().zip(samples) {
            next += g * *u;
        }
        next
    }
}

/// Realizations of `F = lambda^2/(s+lambda)^2`, `F s` and `F s^2` sharing one
/// controllable canonical state.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub lambda: f64,
    pub hold: PolyHold,
}

/// Filter states: one chain driven by `x1_hat`, one by `u`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FilterStates {
    pub x1: [f64; 2],
    pub u: [f64; 2],
}

impl FilterBank {
    pub fn new(lambda: f64, h: f64) -> Self {
        let a = Matrix2::new(0.0, 1.0, -lambda * lambda, -2.0 * lambda);
        let b = Vector2::new(0.0, 1.0);
        Self {
            lambda,
            hold: PolyHold::new(a, b, h),
        }
    }

    /// State of a filter that has seen the constant `u` forever.
    pub fn rest(&self, u: f64) -> [f64; 2] {
        [u / (self.lambda * self.lambda), 0.0]
    }

    /// `F[u]` from the state.
    pub fn f(&self, x: [f64; 2]) -> f64 {
        self.lambda * self.lambda * x[0]
    }

    /// `F[s u]` from the state.
    pub fn fs(&self, x: [f64; 2]) -> f64 {
        self.lambda * self.lambda * x[1]
    }

    /// `F[s^2 u]` from the state and the current input.
    pub fn fs2(&self, x: [f64; 2], u: f64) -> f64 {
        let l = self.lambda;
        let l2 = l * l;
        -l2 * l2 * x[0] - 2.0 * l2 * l * x[1] + l2 * u
    }

    /// `(z, xi)` at the current sample: `z = F[s^2 x1]`, `xi = (-F[s x1], F[u])`.
    pub fn outputs(&self, st: &FilterStates, x1_hat: f64) -> (f64, [f64; 2]) {
        (self.fs2(st.x1, x1_hat), [-self.fs(st.x1), self.f(st.u)])
    }

    /// Advances both chains by one step using the stencil samples.
    pub fn advance(&self, st: &FilterStates, x1: &[f64; 6], u: &[f64; 6]) -> FilterStates {
        let step = |x: [f64; 2], s: &[f64; 6]| {
            let n = self.hold.advance(Vector2::new(x[0], x[1]), s);
            [n[0], n[1]]
        };
        FilterStates {
            x1: step(st.x1, x1),
            u: step(st.u, u),
        }
    }
}
