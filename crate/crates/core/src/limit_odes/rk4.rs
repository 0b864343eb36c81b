//! Classic fixed-step fourth-order Runge-Kutta.

/// Workspace for repeated steps of a system of fixed dimension.
pub(crate) struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub(crate) fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `y` from `t` to `t + dt` for `y' = f(t, y)`; `f` writes the
    /// derivative into its last argument.
    pub(crate) fn step<F>(&mut self, t: f64, dt: f64, y: &mut [f64], mut f: F)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let half = 0.5 * dt;
        f(t, y, &mut self.k1);
        for (i, v) in self.tmp.iter_mut().enumerate() {
            *v = y[i] + half * self.k1[i];
        }
        f(t + half, &self.tmp, &mut self.k2);
        for (i, v) in self.tmp.iter_mut().enumerate() {
            *v = y[i] + half * self.k2[i];
        }
        f(t + half, &self.tmp, &mut self.k3);
        for (i, v) in self.tmp.iter_mut().enumerate() {
            *v = y[i] + dt * self.k3[i];
        }
        f(t + dt, &self.tmp, &mut self.k4);
        for (i, v) in y.iter_mut().enumerate() {
            *v += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_fourth_order() {
        let err = |dt: f64| {
            let mut y = [1.0];
            let mut rk = Rk4::new(1);
            let steps = (1.0 / dt).round() as usize;
            for s in 0..steps {
                rk.step(s as f64 * dt, dt, &mut y, |_, y, dy| dy[0] = -y[0]);
            }
            (y[0] - (-1.0f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((14.0..18.0).contains(&ratio), "{ratio}");
    }
}
