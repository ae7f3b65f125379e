//! Simple temporal network: difference constraints `x_b - x_a <= w` closed
//! under shortest paths.

#[derive(Debug, Clone)]
pub(super) struct Stn {
    n: usize,
    d: Vec<f64>,
}

impl Stn {
    pub(super) fn new(n: usize) -> Self {
        let mut d = vec![f64::INFINITY; n * n];
        for i in 0..n {
            d[i * n + i] = 0.0;
        }
        Self { n, d }
    }

    /// Adds `x_b - x_a <= w`.
    pub(super) fn add(&mut self, a: usize, b: usize, w: f64) {
        let e = &mut self.d[a * self.n + b];
        if w < *e {
            *e = w;
        }
    }

    pub(super) fn dist(&self, a: usize, b: usize) -> f64 {
        self.d[a * self.n + b]
    }

    /// Floyd-Warshall. Returns `false` if a cycle is more negative than `-tol`.
    pub(super) fn close(&mut self, tol: f64) -> bool {
        let n = self.n;
        for k in 0..n {
            for i in 0..n {
                let dik = self.d[i * n + k];
                if dik == f64::INFINITY {
                    continue;
                }
                for j in 0..n {
                    let cand = dik + self.d[k * n + j];
                    if cand < self.d[i * n + j] {
                        self.d[i * n + j] = cand;
                    }
                }
            }
        }
        (0..n).all(|i| self.d[i * n + i] >= -tol)
    }
}
