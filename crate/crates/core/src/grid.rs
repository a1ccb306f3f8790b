/// Uniform tensor-product grid on the box `[-L, L]^3` with `n` points per mode.
///
/// Every cell is an `h^3` cube with `h = 2L / n`. The solver works with the
/// cell centres `-L + (k + 1/2) h`; the raw lattice nodes `-L + k h` are
/// kept for reference. Dirichlet ghost values sit one step outside the
/// first and last centre.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    half_width: f64,
    n: usize,
}

impl Grid {
    pub fn new(half_width: f64, n: usize) -> Self {
        assert!(
            half_width.is_finite() && half_width > 0.0,
            "box half-width must be positive, got {half_width}"
        );
        assert!(n >= 2, "a grid needs at least two points per mode");
        Self { half_width, n }
    }

    /// Grid with a prescribed step; `n` is rounded to the nearest even count.
    pub fn with_step(half_width: f64, step: f64) -> Self {
        let n = ((2.0 * half_width / step) / 2.0).round() as usize * 2;
        Self::new(half_width, n.max(2))
    }

    #[inline]
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn step(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Volume element `h^3` of the discrete inner product.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.step().powi(3)
    }

    /// Raw lattice node `-L + k h`.
    #[inline]
    pub fn node(&self, k: usize) -> f64 {
        -self.half_width + k as f64 * self.step()
    }

    /// Cell centre `-L + (k + 1/2) h`.
    #[inline]
    pub fn center(&self, k: usize) -> f64 {
        -self.half_width + (k as f64 + 0.5) * self.step()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.center(k)).collect()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.node(k)).collect()
    }

    /// Same box, twice as many points per mode.
    pub fn refined(&self) -> Self {
        Self::new(self.half_width, 2 * self.n)
    }
}
