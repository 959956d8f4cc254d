//! Multinomial No-U-Turn transition with the generalized termination
//! criterion, checked across subtree boundaries.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Target;
use crate::error::{Error, Result};
use crate::math::{self, exp, log, log_add_exp, sqrt};

/// Energy error beyond which a trajectory counts as divergent.
const MAX_DELTA_H: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub grad: Vec<f64>,
    pub logp: f64,
}

pub(crate) struct Transition {
    pub point: PhasePoint,
    pub accept_stat: f64,
    pub depth: usize,
    pub n_leapfrog: usize,
    pub divergent: bool,
}

struct TreeState {
    h0: f64,
    step: f64,
    n_leapfrog: usize,
    sum_metro_prob: f64,
    divergent: bool,
}

pub(crate) struct Hamiltonian<'a, T> {
    target: &'a T,
    inv_metric: Vec<f64>,
}

impl<'a, T: Target> Hamiltonian<'a, T> {
    pub fn new(target: &'a T, inv_metric: Vec<f64>) -> Self {
        Self { target, inv_metric }
    }

    pub fn dim(&self) -> usize {
        self.inv_metric.len()
    }

    pub fn inv_metric(&self) -> &[f64] {
        &self.inv_metric
    }

    pub fn set_inv_metric(&mut self, inv_metric: Vec<f64>) {
        self.inv_metric = inv_metric;
    }

    pub fn point_at(&self, q: Vec<f64>) -> Result<PhasePoint> {
        let mut grad = vec![0.0; q.len()];
        let logp = self.target.log_density_grad(&q, &mut grad)?;
        if !logp.is_finite() {
            return Err(Error::NonFinite);
        }
        let p = vec![0.0; q.len()];
        Ok(PhasePoint { q, p, grad, logp })
    }

    fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p
            .iter()
            .zip(&self.inv_metric)
            .map(|(p, m)| m * p * p)
            .sum::<f64>()
    }

    fn energy(&self, z: &PhasePoint) -> f64 {
        let h = -z.logp + self.kinetic(&z.p);
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn p_sharp(&self, p: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(p.iter().zip(&self.inv_metric).map(|(p, m)| m * p));
    }

    fn sample_momentum<R: Rng>(&self, z: &mut PhasePoint, rng: &mut R) {
        for (p, m) in z.p.iter_mut().zip(&self.inv_metric) {
            let n: f64 = StandardNormal.sample(rng);
            *p = n / sqrt(*m);
        }
    }

    /// One leapfrog step. A failed density evaluation leaves `logp = -inf`.
    fn leapfrog(&self, z: &mut PhasePoint, step: f64) {
        let half = 0.5 * step;
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += half * g;
        }
        for ((q, p), m) in z.q.iter_mut().zip(&z.p).zip(&self.inv_metric) {
            *q += step * m * p;
        }
        match self.target.log_density_grad(&z.q, &mut z.grad) {
            Ok(lp) if lp.is_finite() => {
                z.logp = lp;
                for (p, g) in z.p.iter_mut().zip(&z.grad) {
                    *p += half * g;
                }
            }
            _ => z.logp = f64::NEG_INFINITY,
        }
    }

    /// Double or halve `step` until a single leapfrog step crosses an
    /// acceptance probability of 0.8.
    pub fn init_step_size<R: Rng>(
        &self,
        point: &PhasePoint,
        step: f64,
        rng: &mut R,
    ) -> Result<f64> {
        let threshold = log(0.8);
        let trial = |step: f64, rng: &mut R| {
            let mut z = point.clone();
            self.sample_momentum(&mut z, rng);
            let h0 = self.energy(&z);
            self.leapfrog(&mut z, step);
            h0 - self.energy(&z)
        };
        let mut step = step;
        let direction = if trial(step, rng) > threshold { 1 } else { -1 };
        loop {
            let delta_h = trial(step, rng);
            if direction == 1 && !(delta_h > threshold) {
                break;
            }
            if direction == -1 && !(delta_h < threshold) {
                break;
            }
            step = if direction == 1 {
                2.0 * step
            } else {
                0.5 * step
            };
            if step > 1e7 {
                return Err(Error::Sampler(
                    "step size grew without bound; is the target improper?".into(),
                ));
            }
            if step == 0.0 {
                return Err(Error::Sampler(
                    "no positive step size gives a usable leapfrog step".into(),
                ));
            }
        }
        Ok(step)
    }

    pub fn transition<R: Rng>(
        &self,
        init: &PhasePoint,
        step: f64,
        max_depth: usize,
        rng: &mut R,
    ) -> Transition {
        let dim = self.dim();
        let mut z = init.clone();
        self.sample_momentum(&mut z, rng);
        let mut tree = TreeState {
            h0: self.energy(&z),
            step,
            n_leapfrog: 0,
            sum_metro_prob: 0.0,
            divergent: false,
        };

        let mut z_fwd = z.clone();
        let mut z_bck = z.clone();
        let mut z_sample = z.clone();
        let mut z_propose = z.clone();

        let mut p_sharp = Vec::with_capacity(dim);
        self.p_sharp(&z.p, &mut p_sharp);
        let (mut ps_fwd_bck, mut ps_fwd_fwd) = (p_sharp.clone(), p_sharp.clone());
        let (mut ps_bck_fwd, mut ps_bck_bck) = (p_sharp.clone(), p_sharp);
        let (mut p_fwd_bck, mut p_fwd_fwd) = (z.p.clone(), z.p.clone());
        let (mut p_bck_fwd, mut p_bck_bck) = (z.p.clone(), z.p.clone());
        let mut rho = z.p.clone();
        let mut log_sum_weight = 0.0;
        let mut depth = 0;

        while depth < max_depth {
            let mut rho_fwd = vec![0.0; dim];
            let mut rho_bck = vec![0.0; dim];
            let mut lsw_subtree = f64::NEG_INFINITY;
            let valid = if rng.random::<f64>() > 0.5 {
                rho_bck.clone_from(&rho);
                p_bck_fwd.clone_from(&p_fwd_bck);
                ps_bck_fwd.clone_from(&ps_fwd_bck);
                z.clone_from(&z_fwd);
                let ok = self.build_tree(
                    depth,
                    &mut z,
                    &mut z_propose,
                    &mut ps_fwd_bck,
                    &mut ps_fwd_fwd,
                    &mut rho_fwd,
                    &mut p_fwd_bck,
                    &mut p_fwd_fwd,
                    1.0,
                    &mut lsw_subtree,
                    &mut tree,
                    rng,
                );
                z_fwd.clone_from(&z);
                ok
            } else {
                rho_fwd.clone_from(&rho);
                p_fwd_bck.clone_from(&p_bck_fwd);
                ps_fwd_bck.clone_from(&ps_bck_fwd);
                z.clone_from(&z_bck);
                let ok = self.build_tree(
                    depth,
                    &mut z,
                    &mut z_propose,
                    &mut ps_bck_fwd,
                    &mut ps_bck_bck,
                    &mut rho_bck,
                    &mut p_bck_fwd,
                    &mut p_bck_bck,
                    -1.0,
                    &mut lsw_subtree,
                    &mut tree,
                    rng,
                );
                z_bck.clone_from(&z);
                ok
            };
            if !valid {
                break;
            }
            depth += 1;

            if lsw_subtree > log_sum_weight
                || rng.random::<f64>() < exp(lsw_subtree - log_sum_weight)
            {
                z_sample.clone_from(&z_propose);
            }
            log_sum_weight = log_add_exp(log_sum_weight, lsw_subtree);

            for ((r, b), f) in rho.iter_mut().zip(&rho_bck).zip(&rho_fwd) {
                *r = b + f;
            }
            let mut persist = no_u_turn(&ps_bck_bck, &ps_fwd_fwd, &rho);
            let ext: Vec<f64> = rho_bck.iter().zip(&p_fwd_bck).map(|(a, b)| a + b).collect();
            persist &= no_u_turn(&ps_bck_bck, &ps_fwd_bck, &ext);
            let ext: Vec<f64> = rho_fwd.iter().zip(&p_bck_fwd).map(|(a, b)| a + b).collect();
            persist &= no_u_turn(&ps_bck_fwd, &ps_fwd_fwd, &ext);
            if !persist {
                break;
            }
        }

        let accept_stat = if tree.n_leapfrog > 0 {
            tree.sum_metro_prob / tree.n_leapfrog as f64
        } else {
            0.0
        };
        Transition {
            point: z_sample,
            accept_stat,
            depth,
            n_leapfrog: tree.n_leapfrog,
            divergent: tree.divergent,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn build_tree<R: Rng>(
        &self,
        depth: usize,
        z: &mut PhasePoint,
        z_propose: &mut PhasePoint,
        p_sharp_beg: &mut Vec<f64>,
        p_sharp_end: &mut Vec<f64>,
        rho: &mut [f64],
        p_beg: &mut Vec<f64>,
        p_end: &mut Vec<f64>,
        direction: f64,
        log_sum_weight: &mut f64,
        tree: &mut TreeState,
        rng: &mut R,
    ) -> bool {
        if depth == 0 {
            self.leapfrog(z, direction * tree.step);
            tree.n_leapfrog += 1;
            let h = self.energy(z);
            if h - tree.h0 > MAX_DELTA_H {
                tree.divergent = true;
            }
            let delta = tree.h0 - h;
            *log_sum_weight = log_add_exp(*log_sum_weight, delta);
            tree.sum_metro_prob += if delta > 0.0 { 1.0 } else { exp(delta) };
            z_propose.clone_from(z);
            self.p_sharp(&z.p, p_sharp_beg);
            p_sharp_end.clone_from(p_sharp_beg);
            for (r, p) in rho.iter_mut().zip(&z.p) {
                *r += p;
            }
            p_beg.clone_from(&z.p);
            p_end.clone_from(&z.p);
            return !tree.divergent;
        }

        let dim = z.q.len();
        let mut p_sharp_init_end = Vec::with_capacity(dim);
        let mut p_init_end = Vec::with_capacity(dim);
        let mut rho_init = vec![0.0; dim];
        let mut lsw_init = f64::NEG_INFINITY;
        if !self.build_tree(
            depth - 1,
            z,
            z_propose,
            p_sharp_beg,
            &mut p_sharp_init_end,
            &mut rho_init,
            p_beg,
            &mut p_init_end,
            direction,
            &mut lsw_init,
            tree,
            rng,
        ) {
            return false;
        }

        let mut z_propose_final = z.clone();
        let mut p_sharp_final_beg = Vec::with_capacity(dim);
        let mut p_final_beg = Vec::with_capacity(dim);
        let mut rho_final = vec![0.0; dim];
        let mut lsw_final = f64::NEG_INFINITY;
        if !self.build_tree(
            depth - 1,
            z,
            &mut z_propose_final,
            &mut p_sharp_final_beg,
            p_sharp_end,
            &mut rho_final,
            &mut p_final_beg,
            p_end,
            direction,
            &mut lsw_final,
            tree,
            rng,
        ) {
            return false;
        }

        let lsw_subtree = log_add_exp(lsw_init, lsw_final);
        *log_sum_weight = log_add_exp(*log_sum_weight, lsw_subtree);
        if lsw_final > lsw_subtree || rng.random::<f64>() < exp(lsw_final - lsw_subtree) {
            *z_propose = z_propose_final;
        }

        let rho_subtree: Vec<f64> = rho_init
            .iter()
            .zip(&rho_final)
            .map(|(a, b)| a + b)
            .collect();
        for (r, s) in rho.iter_mut().zip(&rho_subtree) {
            *r += s;
        }
        let mut persist = no_u_turn(p_sharp_beg, p_sharp_end, &rho_subtree);
        let ext: Vec<f64> = rho_init
            .iter()
            .zip(&p_final_beg)
            .map(|(a, b)| a + b)
            .collect();
        persist &= no_u_turn(p_sharp_beg, &p_sharp_final_beg, &ext);
        let ext: Vec<f64> = rho_final
            .iter()
            .zip(&p_init_end)
            .map(|(a, b)| a + b)
            .collect();
        persist &= no_u_turn(&p_sharp_init_end, p_sharp_end, &ext);
        persist
    }
}

fn no_u_turn(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    math::dot(p_sharp_plus, rho) > 0.0 && math::dot(p_sharp_minus, rho) > 0.0
}
