//! Warmup adaptation: dual-averaging step size and windowed variance estimation.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{exp, log, pow, sqrt};

pub(crate) struct StepSizeAdapter {
    delta: f64,
    gamma: f64,
    t0: f64,
    kappa: f64,
    mu: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

impl StepSizeAdapter {
    pub fn new(delta: f64, step: f64) -> Self {
        let mut a = Self {
            delta,
            gamma: 0.05,
            t0: 10.0,
            kappa: 0.75,
            mu: 0.0,
            counter: 0.0,
            s_bar: 0.0,
            x_bar: 0.0,
        };
        a.restart(step);
        a
    }

    pub fn restart(&mut self, step: f64) {
        self.mu = log(10.0 * step);
        self.counter = 0.0;
        self.s_bar = 0.0;
        self.x_bar = 0.0;
    }

    /// Feed one acceptance statistic and return the next step size.
    pub fn update(&mut self, accept_stat: f64) -> f64 {
        self.counter += 1.0;
        let accept = accept_stat.min(1.0);
        let eta = 1.0 / (self.counter + self.t0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.delta - accept);
        let x = self.mu - self.s_bar * sqrt(self.counter) / self.gamma;
        let x_eta = pow(self.counter, -self.kappa);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        exp(x)
    }

    pub fn final_step_size(&self) -> f64 {
        exp(self.x_bar)
    }
}

/// Diagonal metric estimation over doubling windows. Windows sit between an
/// initial fast buffer and a terminal fast buffer; warmups shorter than 20
/// iterations leave the metric at the identity.
pub(crate) struct WindowedVariance {
    enabled: bool,
    warmup: usize,
    init_buffer: usize,
    term_buffer: usize,
    window_size: usize,
    next_window: usize,
    counter: usize,
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
    variance: Vec<f64>,
}

impl WindowedVariance {
    pub fn new(dim: usize, warmup: usize) -> Self {
        let (mut init_buffer, mut term_buffer, mut base_window) = (75, 50, 25);
        let enabled = warmup >= 20;
        if enabled && init_buffer + term_buffer + base_window > warmup {
            init_buffer = (0.15 * warmup as f64) as usize;
            term_buffer = (0.1 * warmup as f64) as usize;
            base_window = warmup - (init_buffer + term_buffer);
        }
        Self {
            enabled,
            warmup,
            init_buffer,
            term_buffer,
            window_size: base_window,
            next_window: init_buffer + base_window - 1,
            counter: 0,
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
            variance: vec![1.0; dim],
        }
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    fn last_window_end(&self) -> usize {
        self.warmup - self.term_buffer - 1
    }

    /// Record a warmup position. Returns `true` when a window closed and
    /// [`WindowedVariance::variance`] was updated.
    pub fn observe(&mut self, q: &[f64]) -> bool {
        if !self.enabled {
            return false;
        }
        let c = self.counter;
        if c >= self.init_buffer && c < self.warmup - self.term_buffer {
            self.n += 1;
            let n = self.n as f64;
            for ((m, s), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(q) {
                let d = x - *m;
                *m += d / n;
                *s += d * (x - *m);
            }
        }
        let closed = c == self.next_window;
        if closed {
            self.advance_window();
            if self.n >= 3 {
                let n = self.n as f64;
                for (v, s) in self.variance.iter_mut().zip(&self.m2) {
                    *v = (n / (n + 5.0)) * (s / (n - 1.0)) + 1e-3 * (5.0 / (n + 5.0));
                }
            }
            self.n = 0;
            self.mean.iter_mut().for_each(|m| *m = 0.0);
            self.m2.iter_mut().for_each(|m| *m = 0.0);
        }
        self.counter += 1;
        closed
    }

    fn advance_window(&mut self) {
        let last = self.last_window_end();
        if self.next_window == last {
            // No further windows.
            self.next_window = usize::MAX;
            return;
        }
        self.window_size *= 2;
        self.next_window = self.counter + self.window_size;
        if self.next_window != last
            && self.next_window + 2 * self.window_size >= self.warmup - self.term_buffer
        {
            self.next_window = last;
        }
    }
}
