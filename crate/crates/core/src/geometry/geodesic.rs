use serde::Serialize;

use super::family::ParametricFamily;
use super::metric::FisherRao;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct GeodesicOptions {
    /// RK4 steps over u ∈ [0, 1].
    pub steps: usize,
    /// Points of the returned path, including both ends.
    pub samples: usize,
    pub max_newton: usize,
    /// Endpoint tolerance, relative to `1 + |θ_b|`.
    pub tol: f64,
    /// Relative step for metric derivatives.
    pub fd_step: f64,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        Self {
            steps: 512,
            samples: 101,
            max_newton: 40,
            tol: 1e-10,
            fd_step: 1e-4,
        }
    }
}

/// A solved geodesic.
#[derive(Debug, Clone, Serialize)]
pub struct GeodesicPath {
    pub u: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
    /// Arc length under `g` (with the ¼).
    pub length: f64,
    /// Arc length under the Fisher information `4g`, i.e. `2 · length`.
    pub fisher_information_length: f64,
    /// |θ(1) − θ_b|.
    pub endpoint_error: f64,
    /// Largest discrete geodesic-equation residual at interior points.
    pub residual: f64,
    pub newton_iterations: usize,
}

struct Shot {
    theta: Vec<Vec<f64>>,
    vel: Vec<Vec<f64>>,
}

struct Shooter<'a, F: ParametricFamily + ?Sized> {
    fr: FisherRao<'a, F>,
    steps: usize,
}

impl<F: ParametricFamily + ?Sized> Shooter<'_, F> {
    fn accel(&self, theta: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        if !self.fr.family().in_domain(theta) {
            return Err(Error::DomainExit(theta.to_vec()));
        }
        let mut a = vec![0.0; theta.len()];
        self.fr.christoffel(theta)?.acceleration(v, &mut a);
        Ok(a)
    }

    /// Integrates θ'' = −Γ(θ)(θ', θ') from (θ_a, v0) over u ∈ [0, 1].
    fn shoot(&self, theta_a: &[f64], v0: &[f64], keep: bool) -> Result<Shot> {
        let r = theta_a.len();
        let h = 1.0 / self.steps as f64;
        let mut th = theta_a.to_vec();
        let mut v = v0.to_vec();
        let mut shot = Shot {
            theta: vec![th.clone()],
            vel: vec![v.clone()],
        };
        let axpy = |x: &[f64], a: f64, y: &[f64]| -> Vec<f64> {
            x.iter().zip(y).map(|(p, q)| p + a * q).collect()
        };
        for _ in 0..self.steps {
            let k1x = v.clone();
            let k1v = self.accel(&th, &v)?;
            let x2 = axpy(&th, 0.5 * h, &k1x);
            let v2 = axpy(&v, 0.5 * h, &k1v);
            let k2v = self.accel(&x2, &v2)?;
            let x3 = axpy(&th, 0.5 * h, &v2);
            let v3 = axpy(&v, 0.5 * h, &k2v);
            let k3v = self.accel(&x3, &v3)?;
            let x4 = axpy(&th, h, &v3);
            let v4 = axpy(&v, h, &k3v);
            let k4v = self.accel(&x4, &v4)?;
            for i in 0..r {
                th[i] += h / 6.0 * (k1x[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]);
                v[i] += h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
            }
            if !th.iter().chain(&v).all(|z| z.is_finite()) || !self.fr.family().in_domain(&th) {
                return Err(Error::DomainExit(th));
            }
            if keep {
                shot.theta.push(th.clone());
                shot.vel.push(v.clone());
            }
        }
        if !keep {
            shot.theta.push(th);
            shot.vel.push(v);
        }
        Ok(shot)
    }

    fn end_of(&self, theta_a: &[f64], v0: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .shoot(theta_a, v0, false)?
            .theta
            .pop()
            .expect("non-empty"))
    }

    /// Damped Newton on the initial velocity.
    fn newton(
        &self,
        a: &[f64],
        b: &[f64],
        mut v0: Vec<f64>,
        opts: &GeodesicOptions,
    ) -> Result<(Vec<f64>, usize)> {
        let r = a.len();
        let scale = 1.0 + norm(b);
        let miss = |end: &[f64]| -> Vec<f64> { end.iter().zip(b).map(|(p, q)| p - q).collect() };
        let mut f = miss(&self.end_of(a, &v0)?);
        for iter in 0..opts.max_newton {
            let fn0 = norm(&f);
            if fn0 <= opts.tol * scale {
                return Ok((v0, iter));
            }
            let mut jac = nalgebra::DMatrix::zeros(r, r);
            for j in 0..r {
                let dv = 1e-7 * (1.0 + v0[j].abs());
                let mut vp = v0.clone();
                vp[j] += dv;
                let fp = miss(&self.end_of(a, &vp)?);
                for i in 0..r {
                    jac[(i, j)] = (fp[i] - f[i]) / dv;
                }
            }
            let step = jac
                .lu()
                .solve(&nalgebra::DVector::from_column_slice(&f))
                .ok_or_else(|| Error::NoConvergence("singular shooting Jacobian".into()))?;
            let mut lambda = 1.0;
            loop {
                let trial: Vec<f64> = v0
                    .iter()
                    .zip(step.iter())
                    .map(|(v, s)| v - lambda * s)
                    .collect();
                match self.end_of(a, &trial) {
                    Ok(end) => {
                        let ft = miss(&end);
                        if norm(&ft) < fn0 || lambda < 1e-3 {
                            v0 = trial;
                            f = ft;
                            break;
                        }
                    }
                    Err(Error::DomainExit(_)) if lambda >= 1e-3 => {}
                    Err(e) => return Err(e),
                }
                lambda *= 0.5;
            }
        }
        if norm(&f) <= opts.tol * scale {
            return Ok((v0, opts.max_newton));
        }
        Err(Error::NoConvergence(format!(
            "shooting residual {:e} after {} Newton steps",
            norm(&f),
            opts.max_newton
        )))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Geodesic between `theta_a` and `theta_b` by single shooting.
///
/// If Newton fails from the chord velocity, the target is moved along the
/// chord from `theta_a` toward `theta_b` with bisected increments, reusing
/// each converged velocity as the next starting point.
pub fn geodesic_bvp<F: ParametricFamily + ?Sized>(
    family: &F,
    theta_a: &[f64],
    theta_b: &[f64],
    opts: &GeodesicOptions,
) -> Result<GeodesicPath> {
    let r = family.dim();
    if theta_a.len() != r || theta_b.len() != r {
        return Err(Error::InvalidParams(format!(
            "endpoints must have {r} coordinates"
        )));
    }
    for t in [theta_a, theta_b] {
        if !family.in_domain(t) {
            return Err(Error::DomainExit(t.to_vec()));
        }
    }
    if opts.steps < 2 || opts.samples < 2 {
        return Err(Error::InvalidParams(
            "need at least 2 steps and 2 samples".into(),
        ));
    }
    if theta_a == theta_b {
        return Ok(GeodesicPath {
            u: vec![0.0],
            theta: vec![theta_a.to_vec()],
            length: 0.0,
            fisher_information_length: 0.0,
            endpoint_error: 0.0,
            residual: 0.0,
            newton_iterations: 0,
        });
    }
    let mut fr = FisherRao::new(family);
    fr.fd_step = opts.fd_step;
    let shooter = Shooter {
        fr,
        steps: opts.steps,
    };
    let chord: Vec<f64> = theta_b.iter().zip(theta_a).map(|(b, a)| b - a).collect();

    let (v0, iterations) = match shooter.newton(theta_a, theta_b, chord.clone(), opts) {
        Ok(ok) => ok,
        Err(Error::NoConvergence(_) | Error::DomainExit(_)) => {
            continuation(&shooter, theta_a, &chord, opts)?
        }
        Err(e) => return Err(e),
    };

    let shot = shooter.shoot(theta_a, &v0, true)?;
    let end = shot.theta.last().expect("non-empty");
    let endpoint_error = norm(
        &end.iter()
            .zip(theta_b)
            .map(|(p, q)| p - q)
            .collect::<Vec<_>>(),
    );

    // Simpson's rule on the speed √g(θ', θ')
    let n = opts.steps;
    let h = 1.0 / n as f64;
    let mut speed = Vec::with_capacity(n + 1);
    for (th, v) in shot.theta.iter().zip(&shot.vel) {
        speed.push(shooter.fr.metric(th)?.quadratic(v, v).max(0.0).sqrt());
    }
    let length = if n.is_multiple_of(2) {
        h / 3.0
            * (speed[0]
                + speed[n]
                + (1..n)
                    .map(|k| if k % 2 == 1 { 4.0 } else { 2.0 } * speed[k])
                    .sum::<f64>())
    } else {
        crate::quadrature::trapezoid(&speed, h)
    };

    // discrete residual of θ'' + Γ(θ', θ') = 0 at interior nodes
    let stride = (n / 32).max(1);
    let mut residual = 0.0_f64;
    let mut acc = vec![0.0; r];
    let mut k = stride;
    while k < n {
        let c = shooter.fr.christoffel(&shot.theta[k])?;
        let vel: Vec<f64> = (0..r)
            .map(|i| (shot.theta[k + 1][i] - shot.theta[k - 1][i]) / (2.0 * h))
            .collect();
        c.acceleration(&vel, &mut acc);
        for i in 0..r {
            let second =
                (shot.theta[k + 1][i] - 2.0 * shot.theta[k][i] + shot.theta[k - 1][i]) / (h * h);
            residual = residual.max((second - acc[i]).abs());
        }
        k += stride;
    }

    let (u, theta) = resample(&shot, opts.samples);
    Ok(GeodesicPath {
        u,
        theta,
        length,
        fisher_information_length: 2.0 * length,
        endpoint_error,
        residual,
        newton_iterations: iterations,
    })
}

fn continuation<F: ParametricFamily + ?Sized>(
    shooter: &Shooter<'_, F>,
    a: &[f64],
    chord: &[f64],
    opts: &GeodesicOptions,
) -> Result<(Vec<f64>, usize)> {
    let mut s = 0.0_f64;
    let mut ds = 0.5;
    let mut v: Vec<f64> = chord.to_vec();
    let mut total = 0;
    while s < 1.0 {
        let target_s = (s + ds).min(1.0);
        let target: Vec<f64> = a.iter().zip(chord).map(|(p, c)| p + target_s * c).collect();
        let guess: Vec<f64> = if s == 0.0 {
            chord.iter().map(|c| c * target_s).collect()
        } else {
            v.iter().map(|x| x * target_s / s).collect()
        };
        match shooter.newton(a, &target, guess, opts) {
            Ok((v_new, it)) => {
                v = v_new;
                total += it;
                s = target_s;
                ds = (2.0 * ds).min(1.0 - s).max(1e-12);
            }
            Err(Error::NoConvergence(_) | Error::DomainExit(_)) if ds > 1.0 / 1024.0 => ds *= 0.5,
            Err(e) => return Err(e),
        }
    }
    Ok((v, total))
}

/// Cubic Hermite resampling of an RK path onto `m` equally spaced u values.
fn resample(shot: &Shot, m: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = shot.theta.len() - 1;
    let h = 1.0 / n as f64;
    let mut us = Vec::with_capacity(m);
    let mut out = Vec::with_capacity(m);
    for j in 0..m {
        let u = j as f64 / (m - 1) as f64;
        let k = ((u / h).floor() as usize).min(n - 1);
        let s = (u - k as f64 * h) / h;
        let (s2, s3) = (s * s, s * s * s);
        let (h00, h10, h01, h11) = (
            2.0 * s3 - 3.0 * s2 + 1.0,
            s3 - 2.0 * s2 + s,
            -2.0 * s3 + 3.0 * s2,
            s3 - s2,
        );
        let p: Vec<f64> = (0..shot.theta[0].len())
            .map(|i| {
                h00 * shot.theta[k][i]
                    + h10 * h * shot.vel[k][i]
                    + h01 * shot.theta[k + 1][i]
                    + h11 * h * shot.vel[k + 1][i]
            })
            .collect();
        us.push(u);
        out.push(p);
    }
    (us, out)
}
