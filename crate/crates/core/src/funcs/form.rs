//! Piecewise trigonometric normal form
//! `c + m·x + Σ (a·sin(ωx) + b·cos(ωx))` for the expressions that admit one.
//!
//! Affine, single-sinusoid, `abs` of those and piecewise-linear tables all
//! reduce to this form, which gives closed-form extrema, zeros and
//! variation on each piece.

use std::f64::consts::{PI, TAU};

use super::expr::{Expr, PiecewiseLinear};

/// Coefficients that cancel to within this fraction of their inputs are
/// snapped to zero when terms are added.
const MERGE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Harmonic {
    pub freq: f64,
    pub sin: f64,
    pub cos: f64,
}

impl Harmonic {
    pub fn amplitude(&self) -> f64 {
        self.sin.hypot(self.cos)
    }

    /// Phase `θ` with `a·sin(ωx) + b·cos(ωx) = R·sin(ωx + θ)`.
    pub fn phase(&self) -> f64 {
        self.cos.atan2(self.sin)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrigForm {
    pub constant: f64,
    pub slope: f64,
    pub harmonics: Vec<Harmonic>,
}

/// Zero set of a function on an interval.
#[derive(Debug, Clone, PartialEq)]
pub enum ZeroSet {
    Everywhere,
    Points(Vec<f64>),
}

fn cancel(sum: f64, a: f64, b: f64) -> f64 {
    if sum.abs() <= MERGE_RTOL * (a.abs() + b.abs()) {
        0.0
    } else {
        sum
    }
}

/// Drop rounding noise from a trig value of an argument that should give 0.
fn snap_trig(v: f64, arg: f64) -> f64 {
    if v.abs() <= 4.0 * f64::EPSILON * arg.abs().max(1.0) {
        0.0
    } else {
        v
    }
}

fn near(lo: f64, hi: f64) -> f64 {
    1e-12 * lo.abs().max(hi.abs()).max(hi - lo).max(1.0)
}

impl TrigForm {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            ..Self::default()
        }
    }

    pub fn affine(c: f64, m: f64) -> Self {
        Self {
            constant: c,
            slope: m,
            harmonics: Vec::new(),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.slope == 0.0 && self.harmonics.is_empty()
    }

    pub fn is_affine(&self) -> bool {
        self.harmonics.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.is_constant()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut v = self.constant + self.slope * x;
        for h in &self.harmonics {
            let (s, c) = (h.freq * x).sin_cos();
            v += h.sin * s + h.cos * c;
        }
        v
    }

    pub fn scale(&self, k: f64) -> Self {
        if k == 0.0 {
            return Self::constant(0.0);
        }
        Self {
            constant: self.constant * k,
            slope: self.slope * k,
            harmonics: self
                .harmonics
                .iter()
                .map(|h| Harmonic {
                    freq: h.freq,
                    sin: h.sin * k,
                    cos: h.cos * k,
                })
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut harmonics = self.harmonics.clone();
        for h in &other.harmonics {
            match harmonics
                .iter_mut()
                .find(|g| (g.freq - h.freq).abs() <= MERGE_RTOL * g.freq.max(h.freq))
            {
                Some(g) => {
                    g.sin = cancel(g.sin + h.sin, g.sin, h.sin);
                    g.cos = cancel(g.cos + h.cos, g.cos, h.cos);
                }
                None => harmonics.push(*h),
            }
        }
        harmonics.retain(|h| h.sin != 0.0 || h.cos != 0.0);
        harmonics.sort_by(|a, b| a.freq.total_cmp(&b.freq));
        Self {
            constant: cancel(self.constant + other.constant, self.constant, other.constant),
            slope: cancel(self.slope + other.slope, self.slope, other.slope),
            harmonics,
        }
    }

    /// `sin(c + m·x)` or `cos(c + m·x)` of an affine argument.
    fn trig_of_affine(c: f64, m: f64, cosine: bool) -> Self {
        if m == 0.0 {
            return Self::constant(if cosine { c.cos() } else { c.sin() });
        }
        let (sc, cc) = (snap_trig(c.sin(), c), snap_trig(c.cos(), c));
        let sign = m.signum();
        let (sin, cos) = if cosine {
            (-sign * sc, cc)
        } else {
            (sign * cc, sc)
        };
        let mut form = Self::constant(0.0);
        if sin != 0.0 || cos != 0.0 {
            form.harmonics.push(Harmonic {
                freq: m.abs(),
                sin,
                cos,
            });
        }
        form
    }

    /// Bound on |g'| over the whole real line.
    pub fn lipschitz(&self) -> f64 {
        self.slope.abs()
            + self
                .harmonics
                .iter()
                .map(|h| h.freq * h.amplitude())
                .sum::<f64>()
    }

    /// Critical points in `[lo, hi]`, with the function value at each.
    /// `None` when there is more than one harmonic.
    fn critical_points(&self, lo: f64, hi: f64) -> Option<Vec<(f64, f64)>> {
        let h = match self.harmonics.as_slice() {
            [] => return Some(Vec::new()),
            [h] => h,
            _ => return None,
        };
        let (w, r_amp, theta) = (h.freq, h.amplitude(), h.phase());
        // g'(x) = m + R·ω·cos(ωx + θ)
        let r = -self.slope / (r_amp * w);
        if r.abs() > 1.0 {
            return Some(Vec::new());
        }
        let alpha = r.acos();
        let peak = (1.0 - r * r).max(0.0).sqrt();
        let tol = near(lo, hi);
        let (p_lo, p_hi) = (w * lo + theta, w * hi + theta);
        let mut out = Vec::new();
        for (base, sign) in [(alpha, 1.0), (-alpha, -1.0)] {
            let n0 = ((p_lo - base) / TAU).floor() as i64 - 1;
            let n1 = ((p_hi - base) / TAU).ceil() as i64 + 1;
            for n in n0..=n1 {
                let phase = base + TAU * n as f64;
                let x = (phase - theta) / w;
                if x >= lo - tol && x <= hi + tol {
                    let x = x.clamp(lo, hi);
                    let value = self.constant + self.slope * x + sign * r_amp * peak;
                    out.push((x, value));
                }
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        Some(out)
    }

    /// Signed `(min, max)` over `[lo, hi]`.
    pub fn extrema(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let crit = self.critical_points(lo, hi)?;
        let mut mn = self.eval(lo).min(self.eval(hi));
        let mut mx = self.eval(lo).max(self.eval(hi));
        for (_, v) in crit {
            mn = mn.min(v);
            mx = mx.max(v);
        }
        Some((mn, mx))
    }

    /// Total variation over `[lo, hi]`, summing the monotone runs.
    pub fn variation(&self, lo: f64, hi: f64) -> Option<f64> {
        let crit = self.critical_points(lo, hi)?;
        let mut prev = self.eval(lo);
        let mut total = 0.0;
        for (_, v) in crit {
            total += (v - prev).abs();
            prev = v;
        }
        Some(total + (self.eval(hi) - prev).abs())
    }

    pub fn zeros(&self, lo: f64, hi: f64) -> Option<ZeroSet> {
        let tol = near(lo, hi);
        let keep = |x: f64, out: &mut Vec<f64>| {
            if x >= lo - tol && x <= hi + tol {
                out.push(x.clamp(lo, hi));
            }
        };
        let mut out = Vec::new();
        match self.harmonics.as_slice() {
            [] if self.slope == 0.0 => {
                return Some(if self.constant == 0.0 {
                    ZeroSet::Everywhere
                } else {
                    ZeroSet::Points(Vec::new())
                });
            }
            [] => keep(-self.constant / self.slope, &mut out),
            [h] if self.slope == 0.0 => {
                let (w, r_amp, theta) = (h.freq, h.amplitude(), h.phase());
                let s = -self.constant / r_amp;
                if s.abs() <= 1.0 {
                    let alpha = s.asin();
                    let (p_lo, p_hi) = (w * lo + theta, w * hi + theta);
                    for base in [alpha, PI - alpha] {
                        let n0 = ((p_lo - base) / TAU).floor() as i64 - 1;
                        let n1 = ((p_hi - base) / TAU).ceil() as i64 + 1;
                        for n in n0..=n1 {
                            keep((base + TAU * n as f64 - theta) / w, &mut out);
                        }
                    }
                }
            }
            _ => return None,
        }
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() <= tol);
        Some(ZeroSet::Points(out))
    }
}

/// A function that is a [`TrigForm`] on each piece of a partition.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseForm {
    breaks: Vec<f64>,
    pieces: Vec<TrigForm>,
}

impl PiecewiseForm {
    fn single(lo: f64, hi: f64, form: TrigForm) -> Self {
        Self {
            breaks: vec![lo, hi],
            pieces: vec![form],
        }
    }

    /// Normal form of `expr` on `[lo, hi]`, if it has one.
    pub fn from_expr(expr: &Expr, lo: f64, hi: f64) -> Option<Self> {
        let single = |f| Some(Self::single(lo, hi, f));
        match expr {
            Expr::Num(c) => single(TrigForm::constant(*c)),
            Expr::Pi => single(TrigForm::constant(PI)),
            Expr::X => single(TrigForm::affine(0.0, 1.0)),
            Expr::Neg(a) => Some(Self::from_expr(a, lo, hi)?.map(|p| p.scale(-1.0))),
            Expr::Add(a, b) => Self::combine(
                &Self::from_expr(a, lo, hi)?,
                &Self::from_expr(b, lo, hi)?,
                |p, q| Some(p.add(q)),
            ),
            Expr::Sub(a, b) => Self::combine(
                &Self::from_expr(a, lo, hi)?,
                &Self::from_expr(b, lo, hi)?,
                |p, q| Some(p.add(&q.scale(-1.0))),
            ),
            Expr::Mul(a, b) => Self::combine(
                &Self::from_expr(a, lo, hi)?,
                &Self::from_expr(b, lo, hi)?,
                |p, q| {
                    if p.is_constant() {
                        Some(q.scale(p.constant))
                    } else if q.is_constant() {
                        Some(p.scale(q.constant))
                    } else {
                        None
                    }
                },
            ),
            Expr::Div(a, b) => {
                let d = b.eval(0.0);
                Some(Self::from_expr(a, lo, hi)?.map(|p| p.scale(1.0 / d)))
            }
            Expr::Sin(a) | Expr::Cos(a) => {
                let cosine = matches!(expr, Expr::Cos(_));
                let inner = Self::from_expr(a, lo, hi)?;
                let pieces = inner
                    .pieces
                    .iter()
                    .map(|p| {
                        p.is_affine()
                            .then(|| TrigForm::trig_of_affine(p.constant, p.slope, cosine))
                    })
                    .collect::<Option<Vec<_>>>()?;
                Some(Self {
                    breaks: inner.breaks,
                    pieces,
                })
            }
            Expr::Abs(a) => Self::from_expr(a, lo, hi)?.abs(),
            Expr::Table(t, a) => Self::from_expr(a, lo, hi)?.through_table(t),
        }
    }

    fn map(self, f: impl Fn(&TrigForm) -> TrigForm) -> Self {
        Self {
            pieces: self.pieces.iter().map(f).collect(),
            breaks: self.breaks,
        }
    }

    fn from_parts(parts: Vec<(f64, f64, TrigForm)>) -> Self {
        let mut breaks = vec![parts[0].0];
        let mut pieces = Vec::with_capacity(parts.len());
        for (_, hi, form) in parts {
            breaks.push(hi);
            pieces.push(form);
        }
        Self { breaks, pieces }
    }

    fn combine(
        a: &Self,
        b: &Self,
        op: impl Fn(&TrigForm, &TrigForm) -> Option<TrigForm>,
    ) -> Option<Self> {
        let mut cuts: Vec<f64> = a.breaks.iter().chain(&b.breaks).copied().collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut parts = Vec::with_capacity(cuts.len());
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let f = op(&a.pieces[a.piece_at(mid)], &b.pieces[b.piece_at(mid)])?;
            parts.push((w[0], w[1], f));
        }
        Some(Self::from_parts(parts))
    }

    fn abs(&self) -> Option<Self> {
        let mut parts = Vec::new();
        for (lo, hi, p) in self.iter() {
            let mut cuts = vec![lo];
            if let ZeroSet::Points(z) = p.zeros(lo, hi)? {
                cuts.extend(z.into_iter().filter(|&x| x > lo && x < hi));
            }
            cuts.push(hi);
            for w in cuts.windows(2) {
                let sign = if p.eval(0.5 * (w[0] + w[1])) < 0.0 { -1.0 } else { 1.0 };
                parts.push((w[0], w[1], p.scale(sign)));
            }
        }
        Some(Self::from_parts(parts))
    }

    fn through_table(&self, t: &PiecewiseLinear) -> Option<Self> {
        let pts = t.points();
        let mut parts = Vec::new();
        for (lo, hi, p) in self.iter() {
            if !p.is_affine() {
                return None;
            }
            let (c, m) = (p.constant, p.slope);
            let mut cuts = vec![lo];
            if m != 0.0 {
                let mut xs: Vec<f64> = pts
                    .iter()
                    .map(|&(u, _)| (u - c) / m)
                    .filter(|&x| x > lo && x < hi)
                    .collect();
                xs.sort_by(f64::total_cmp);
                cuts.extend(xs);
            }
            cuts.push(hi);
            for w in cuts.windows(2) {
                let u = c + m * 0.5 * (w[0] + w[1]);
                let form = if u <= pts[0].0 {
                    TrigForm::constant(pts[0].1)
                } else if u >= pts[pts.len() - 1].0 {
                    TrigForm::constant(pts[pts.len() - 1].1)
                } else {
                    let seg = pts.partition_point(|q| q.0 <= u) - 1;
                    let s = t.slope(seg);
                    let (x0, y0) = pts[seg];
                    TrigForm::affine(y0 + s * (c - x0), s * m)
                };
                parts.push((w[0], w[1], form));
            }
        }
        Some(Self::from_parts(parts))
    }

    fn piece_at(&self, x: f64) -> usize {
        let k = self.breaks.partition_point(|&b| b <= x);
        k.saturating_sub(1).min(self.pieces.len() - 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64, &TrigForm)> {
        self.pieces
            .iter()
            .enumerate()
            .map(|(k, p)| (self.breaks[k], self.breaks[k + 1], p))
    }

    /// Pieces clipped to `[lo, hi]`.
    fn clipped(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64, &TrigForm)> {
        self.iter().filter_map(move |(a, b, p)| {
            let (a, b) = (a.max(lo), b.min(hi));
            (a < b || (a == b && lo == hi)).then_some((a, b, p))
        })
    }

    pub fn pieces(&self) -> &[TrigForm] {
        &self.pieces
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.pieces[self.piece_at(x)].eval(x)
    }

    pub fn extrema(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let mut out: Option<(f64, f64)> = None;
        for (a, b, p) in self.clipped(lo, hi) {
            let (mn, mx) = p.extrema(a, b)?;
            out = Some(match out {
                None => (mn, mx),
                Some((m0, m1)) => (m0.min(mn), m1.max(mx)),
            });
        }
        out
    }

    pub fn variation(&self, lo: f64, hi: f64) -> Option<f64> {
        self.clipped(lo, hi).map(|(a, b, p)| p.variation(a, b)).sum()
    }

    pub fn lipschitz(&self, lo: f64, hi: f64) -> f64 {
        self.clipped(lo, hi)
            .map(|(_, _, p)| p.lipschitz())
            .fold(0.0, f64::max)
    }

    pub fn zeros(&self, lo: f64, hi: f64) -> Option<ZeroSet> {
        let mut all = Vec::new();
        for (a, b, p) in self.clipped(lo, hi) {
            match p.zeros(a, b)? {
                ZeroSet::Everywhere if a < b => return Some(ZeroSet::Everywhere),
                ZeroSet::Everywhere => all.push(a),
                ZeroSet::Points(z) => all.extend(z),
            }
        }
        all.sort_by(f64::total_cmp);
        let tol = near(lo, hi);
        all.dedup_by(|a, b| (*a - *b).abs() <= tol);
        Some(ZeroSet::Points(all))
    }

    /// The common value when every piece is the same constant.
    pub fn constant_value(&self) -> Option<f64> {
        let c = self.pieces[0].constant;
        self.pieces
            .iter()
            .all(|p| p.is_constant() && p.constant == c)
            .then_some(c)
    }

    pub fn has_zero_piece(&self) -> bool {
        self.iter().any(|(a, b, p)| a < b && p.is_zero())
    }
}
