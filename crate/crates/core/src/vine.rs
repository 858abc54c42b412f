//! D-vine copulas in three and four dimensions.
//!
//! A model is a path `o₁ - o₂ - … - o_d` over the variables plus one pair
//! copula per edge. Edges are kept in canonical order:
//!
//! * d = 3: `(o₁o₂) (o₂o₃) | (o₁o₃;o₂)`
//! * d = 4: `(o₁o₂) (o₂o₃) (o₃o₄) | (o₁o₃;o₂) (o₂o₄;o₃) | (o₁o₄;o₂o₃)`
//!
//! Internally everything is evaluated in path positions; public methods take
//! coordinates in variable order and permute.
//!
//! Censored likelihood contributions are mixed partial derivatives of the
//! vine CDF with respect to the uncensored coordinates. Writing the CDF by
//! conditioning on the inner path variables gives, for d = 4,
//!
//! ```text
//! ∂^k C / ∂u_{S} = ∫∫ c₂₃(v₂, v₃) · [c₁₂ c₁₃;₂]^{δ₁} · [c₃₄ c₂₄;₃]^{δ₄} · T(w₁, w₄)
//! ```
//!
//! where an inner coordinate is integrated over `[0, u]` when censored and
//! fixed at `u` when observed, `w₁ = h₁|₃;₂(h₁|₂ | h₃|₂)`,
//! `w₄ = h₄|₂;₃(h₄|₃ | h₂|₃)` and the top factor `T` is `C₁₄;₂₃`, one of its
//! h-functions, or its density depending on which outer coordinates are
//! observed. The 16 combinations are the cases listed by [`derivative_case`].
//! The three-dimensional catalog has the same shape with a single inner
//! coordinate and no `c₂₃` factor.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::copula::{Family, FrankPrepared, PairCopula};
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::scalar::Scalar;

/// Conditioned pair and conditioning set of one vine edge, in variable
/// labels (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeLabel {
    pub conditioned: (usize, usize),
    pub conditioning: Vec<usize>,
}

impl EdgeLabel {
    /// Tree level, starting at 1.
    pub fn tree(&self) -> usize {
        self.conditioning.len() + 1
    }
}

impl std::fmt::Display for EdgeLabel {
    /// 1-based, ascending: `13`, `14;3`, `12;34`.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (a, b) = self.conditioned;
        write!(f, "{}{}", a.min(b) + 1, a.max(b) + 1)?;
        if !self.conditioning.is_empty() {
            let mut c = self.conditioning.clone();
            c.sort_unstable();
            f.write_str(";")?;
            for v in c {
                write!(f, "{}", v + 1)?;
            }
        }
        Ok(())
    }
}

/// Which coordinates of a cluster were observed as events.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CensoringPattern {
    observed: Vec<bool>,
}

impl CensoringPattern {
    pub fn new(observed: Vec<bool>) -> Self {
        Self { observed }
    }

    /// From 0/1 event indicators.
    pub fn from_indicators(delta: &[u8]) -> Result<Self> {
        delta
            .iter()
            .map(|&d| match d {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::Data(format!("event indicator must be 0 or 1, got {other}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn all_observed(d: usize) -> Self {
        Self::new(vec![true; d])
    }

    pub fn all_censored(d: usize) -> Self {
        Self::new(vec![false; d])
    }

    pub fn dim(&self) -> usize {
        self.observed.len()
    }

    pub fn is_observed(&self, j: usize) -> bool {
        self.observed[j]
    }

    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    /// Variables (0-based) with an observed event: the arguments of the
    /// single joint censoring indicator that equals one.
    pub fn uncensored(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| self.observed[j]).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.observed.iter().all(|&o| o)
    }

    pub fn needs_integration(&self, order: &[usize]) -> bool {
        order[1..order.len() - 1].iter().any(|&v| !self.observed[v])
    }
}

impl std::fmt::Display for CensoringPattern {
    /// `Δ` for all-censored, otherwise `Δ(p,q,…)` with 1-based labels.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let unc = self.uncensored();
        if unc.is_empty() {
            return f.write_str("Δ");
        }
        let labels: Vec<String> = unc.iter().map(|j| (j + 1).to_string()).collect();
        write!(f, "Δ({})", labels.join(","))
    }
}

/// Case label of the four-dimensional derivative catalog for a set of
/// observed path positions (0-based positions, ascending).
pub fn derivative_case(observed_positions: &[bool; 4]) -> &'static str {
    match observed_positions {
        [false, false, false, false] => "1",
        [true, false, false, false] => "2(a)",
        [false, true, false, false] => "2(b)",
        [false, false, true, false] => "2(c)",
        [false, false, false, true] => "2(d)",
        [true, true, false, false] => "3(a)",
        [true, false, true, false] => "3(b)",
        [true, false, false, true] => "3(c)",
        [false, true, true, false] => "3(d)",
        [false, true, false, true] => "3(e)",
        [false, false, true, true] => "3(f)",
        [true, true, true, false] => "4(a)",
        [true, true, false, true] => "4(b)",
        [true, false, true, true] => "4(c)",
        [false, true, true, true] => "4(d)",
        [true, true, true, true] => "5",
    }
}

/// Tree-1 quantities of one derivative evaluation, laid out on the
/// integration grid. They depend only on the first-tree copulas, so they can
/// be reused while higher-tree parameters vary.
#[derive(Debug, Clone)]
pub enum Tree1Grid<T> {
    Three {
        observed: [bool; 3],
        /// weight · c₁₂^{δ₁} · c₂₃^{δ₃}, per node
        weight: Vec<T>,
        /// h₁|₂(u₁ | v₂)
        a1: Vec<T>,
        /// h₃|₂(u₃ | v₂)
        a3: Vec<T>,
    },
    Four {
        observed: [bool; 4],
        n3: usize,
        /// weight₂ · weight₃ · c₂₃ · c₁₂^{δ₁} · c₃₄^{δ₄}, per (v₂, v₃)
        weight: Vec<T>,
        /// h₁|₂(u₁ | v₂), per v₂
        a1: Vec<T>,
        /// h₄|₃(u₄ | v₃), per v₃
        a4: Vec<T>,
        /// h₃|₂(v₃ | v₂), per (v₂, v₃)
        b3: Vec<T>,
        /// h₂|₃(v₂ | v₃), per (v₂, v₃)
        b2: Vec<T>,
    },
}

impl<T: Scalar> Tree1Grid<T> {
    /// Number of integrand evaluations the upper trees will perform.
    pub fn len(&self) -> usize {
        match self {
            Tree1Grid::Three { weight, .. } | Tree1Grid::Four { weight, .. } => weight.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DVineModel<T> {
    order: Vec<usize>,
    edges: Vec<PairCopula<T>>,
}

impl<T: Scalar> DVineModel<T> {
    /// `order` lists the variables (0-based) along the first tree; `edges`
    /// are in canonical order.
    pub fn new(order: Vec<usize>, edges: Vec<PairCopula<T>>) -> Result<Self> {
        let d = order.len();
        if !(d == 3 || d == 4) {
            return Err(Error::Structure(format!(
                "only 3- and 4-dimensional D-vines are supported, got d={d}"
            )));
        }
        let mut seen = vec![false; d];
        for &v in &order {
            if v >= d || seen[v] {
                return Err(Error::Structure(format!("order {order:?} is not a permutation")));
            }
            seen[v] = true;
        }
        if edges.len() != edge_count(d) {
            return Err(Error::Structure(format!(
                "a {d}-dimensional D-vine has {} edges, got {}",
                edge_count(d),
                edges.len()
            )));
        }
        Ok(Self { order, edges })
    }

    /// Identity order with the given families and parameters.
    pub fn from_params(order: Vec<usize>, families: &[Family], thetas: &[T]) -> Result<Self> {
        if families.len() != thetas.len() {
            return Err(Error::Structure("families and parameters differ in length".into()));
        }
        let edges = families
            .iter()
            .zip(thetas)
            .map(|(&f, &t)| PairCopula::new(f, t))
            .collect::<Result<Vec<_>>>()?;
        Self::new(order, edges)
    }

    pub fn independence(d: usize) -> Result<Self> {
        Self::new((0..d).collect(), vec![PairCopula::independence(); edge_count(d)])
    }

    pub fn dim(&self) -> usize {
        self.order.len()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn edges(&self) -> &[PairCopula<T>] {
        &self.edges
    }

    pub fn families(&self) -> Vec<Family> {
        self.edges.iter().map(|e| e.family()).collect()
    }

    pub fn thetas(&self) -> Vec<T> {
        self.edges.iter().map(|e| e.theta()).collect()
    }

    /// Same structure and families, new parameters.
    pub fn with_thetas(&self, thetas: &[T]) -> Result<Self> {
        if thetas.len() != self.edges.len() {
            return Err(Error::Structure(format!(
                "expected {} parameters, got {}",
                self.edges.len(),
                thetas.len()
            )));
        }
        let edges = self
            .edges
            .iter()
            .zip(thetas)
            .map(|(e, &t)| PairCopula::new(e.family(), t))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.order.clone(), edges)
    }

    /// Number of first-tree edges, `d - 1`.
    pub fn tree1_len(&self) -> usize {
        self.dim() - 1
    }

    /// Labels of the canonical edges.
    pub fn edge_labels(&self) -> Vec<EdgeLabel> {
        let o = &self.order;
        let mut labels: Vec<EdgeLabel> = (0..self.dim() - 1)
            .map(|p| EdgeLabel {
                conditioned: (o[p], o[p + 1]),
                conditioning: vec![],
            })
            .collect();
        for p in 0..self.dim() - 2 {
            labels.push(EdgeLabel {
                conditioned: (o[p], o[p + 2]),
                conditioning: vec![o[p + 1]],
            });
        }
        if self.dim() == 4 {
            labels.push(EdgeLabel {
                conditioned: (o[0], o[3]),
                conditioning: vec![o[1], o[2]],
            });
        }
        labels
    }

    /// The same joint law described along the reversed path.
    pub fn reversed(&self) -> Self {
        let order: Vec<usize> = self.order.iter().rev().copied().collect();
        let e = &self.edges;
        let edges = match self.dim() {
            3 => vec![e[1], e[0], e[2]],
            _ => vec![e[2], e[1], e[0], e[4], e[3], e[5]],
        };
        Self { order, edges }
    }

    fn check_point(&self, u: &[T]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::Structure(format!(
                "point has {} coordinates, model has {}",
                u.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    fn to_positions(&self, u: &[T]) -> [T; 4] {
        let mut x = [T::zero(); 4];
        for (p, &v) in self.order.iter().enumerate() {
            x[p] = u[v];
        }
        x
    }

    /// Vine density at `u` (variable order).
    pub fn density(&self, u: &[T]) -> Result<T> {
        self.check_point(u)?;
        let x = self.to_positions(u);
        let e = &self.edges;
        Ok(match self.dim() {
            3 => {
                let a1 = e[0].h(x[0], x[1]);
                let a3 = e[1].h(x[2], x[1]);
                e[0].pdf(x[0], x[1]) * e[1].pdf(x[1], x[2]) * e[2].pdf(a1, a3)
            }
            _ => {
                let h12 = e[0].h(x[0], x[1]);
                let h32 = e[1].h(x[2], x[1]);
                let h23 = e[1].h(x[1], x[2]);
                let h43 = e[2].h(x[3], x[2]);
                let w1 = e[3].h(h12, h32);
                let w4 = e[4].h(h43, h23);
                e[0].pdf(x[0], x[1])
                    * e[1].pdf(x[1], x[2])
                    * e[2].pdf(x[2], x[3])
                    * e[3].pdf(h12, h32)
                    * e[4].pdf(h23, h43)
                    * e[5].pdf(w1, w4)
            }
        })
    }

    /// Log density, summed term by term.
    pub fn ln_density(&self, u: &[T]) -> Result<T> {
        self.check_point(u)?;
        let x = self.to_positions(u);
        let e = &self.edges;
        Ok(match self.dim() {
            3 => {
                let a1 = e[0].h(x[0], x[1]);
                let a3 = e[1].h(x[2], x[1]);
                e[0].ln_pdf(x[0], x[1]) + e[1].ln_pdf(x[1], x[2]) + e[2].ln_pdf(a1, a3)
            }
            _ => {
                let h12 = e[0].h(x[0], x[1]);
                let h32 = e[1].h(x[2], x[1]);
                let h23 = e[1].h(x[1], x[2]);
                let h43 = e[2].h(x[3], x[2]);
                let w1 = e[3].h(h12, h32);
                let w4 = e[4].h(h43, h23);
                e[0].ln_pdf(x[0], x[1])
                    + e[1].ln_pdf(x[1], x[2])
                    + e[2].ln_pdf(x[2], x[3])
                    + e[3].ln_pdf(h12, h32)
                    + e[4].ln_pdf(h23, h43)
                    + e[5].ln_pdf(w1, w4)
            }
        })
    }

    /// Conditional distribution of `target` given the variables in `given`,
    /// for the conditioning sets the D-vine provides in closed form: a path
    /// neighbour, two consecutive path variables next to the target, or (for
    /// d = 4) the three other variables when the target is a path end.
    pub fn conditional_cdf(&self, target: usize, given: &[usize], u: &[T]) -> Result<T> {
        self.check_point(u)?;
        let d = self.dim();
        let pos = self.positions();
        if target >= d || given.iter().any(|&g| g >= d || g == target) {
            return Err(Error::Structure(format!(
                "invalid conditional: target {target}, given {given:?}"
            )));
        }
        let x = self.to_positions(u);
        let e = &self.edges;
        let pt = pos[target];
        let mut pg: Vec<usize> = given.iter().map(|&g| pos[g]).collect();
        pg.sort_unstable();
        pg.dedup();
        let bad = || {
            Error::Structure(format!(
                "C({target}|{given:?}) is not a closed-form conditional of this D-vine"
            ))
        };
        match pg.len() {
            1 => {
                let g = pg[0];
                if pt.abs_diff(g) != 1 {
                    return Err(bad());
                }
                Ok(e[pt.min(g)].h(x[pt], x[g]))
            }
            2 => {
                let (g0, g1) = (pg[0], pg[1]);
                if g1 != g0 + 1 {
                    return Err(bad());
                }
                if pt + 1 == g0 {
                    let p = pt;
                    let left = e[p].h(x[p], x[p + 1]);
                    let right = e[p + 1].h(x[p + 2], x[p + 1]);
                    Ok(e[d - 1 + p].h(left, right))
                } else if pt == g1 + 1 {
                    let p = g0;
                    let left = e[p].h(x[p], x[p + 1]);
                    let right = e[p + 1].h(x[p + 2], x[p + 1]);
                    Ok(e[d - 1 + p].h(right, left))
                } else {
                    Err(bad())
                }
            }
            3 if d == 4 && (pt == 0 || pt == 3) => {
                let h12 = e[0].h(x[0], x[1]);
                let h32 = e[1].h(x[2], x[1]);
                let h23 = e[1].h(x[1], x[2]);
                let h43 = e[2].h(x[3], x[2]);
                let w1 = e[3].h(h12, h32);
                let w4 = e[4].h(h43, h23);
                Ok(if pt == 0 { e[5].h(w1, w4) } else { e[5].h(w4, w1) })
            }
            _ => Err(bad()),
        }
    }

    /// Position of each variable on the path.
    fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.dim()];
        for (p, &v) in self.order.iter().enumerate() {
            pos[v] = p;
        }
        pos
    }

    fn observed_positions(&self, pattern: &CensoringPattern) -> Result<[bool; 4]> {
        if pattern.dim() != self.dim() {
            return Err(Error::Structure(format!(
                "pattern has {} indicators, model has dimension {}",
                pattern.dim(),
                self.dim()
            )));
        }
        let mut obs = [false; 4];
        for (p, &v) in self.order.iter().enumerate() {
            obs[p] = pattern.is_observed(v);
        }
        Ok(obs)
    }

    /// Catalog label (d = 4) for the derivative this pattern requires.
    pub fn case_label(&self, pattern: &CensoringPattern) -> Result<String> {
        let obs = self.observed_positions(pattern)?;
        Ok(match self.dim() {
            4 => derivative_case(&obs).to_string(),
            _ => {
                let unc: Vec<String> = (0..3).filter(|&p| obs[p]).map(|p| (p + 1).to_string()).collect();
                format!("d3[{}]", unc.join(","))
            }
        })
    }

    /// Mixed partial derivative of the vine CDF with respect to the
    /// observed coordinates of `pattern`, at `u` (variable order). All
    /// censored gives the CDF itself; all observed gives the density.
    pub fn partial_derivative(
        &self,
        pattern: &CensoringPattern,
        u: &[T],
        rule: &GaussLegendre<T>,
    ) -> Result<T> {
        let grid = self.tree1_grid(pattern, u, rule)?;
        let value = self.upper_trees(&grid);
        if !value.is_finite() {
            return Err(Error::Numerical(format!(
                "derivative for pattern {pattern} at {u:?} is not finite"
            )));
        }
        Ok(value)
    }

    /// Vine CDF (all coordinates censored).
    pub fn cdf(&self, u: &[T], rule: &GaussLegendre<T>) -> Result<T> {
        self.partial_derivative(&CensoringPattern::all_censored(self.dim()), u, rule)
    }

    /// First stage of [`partial_derivative`](Self::partial_derivative): all
    /// quantities that involve only first-tree copulas.
    pub fn tree1_grid(
        &self,
        pattern: &CensoringPattern,
        u: &[T],
        rule: &GaussLegendre<T>,
    ) -> Result<Tree1Grid<T>> {
        self.check_point(u)?;
        let obs = self.observed_positions(pattern)?;
        let x = self.to_positions(u);
        let e = &self.edges;
        let grid_for = |observed: bool, upper: T| -> Vec<(T, T)> {
            if observed {
                vec![(upper, T::one())]
            } else {
                rule.scaled(upper).collect()
            }
        };
        match self.dim() {
            3 => {
                let g2 = grid_for(obs[1], x[1]);
                let mut weight = Vec::with_capacity(g2.len());
                let mut a1 = Vec::with_capacity(g2.len());
                let mut a3 = Vec::with_capacity(g2.len());
                for &(v2, w) in &g2 {
                    let mut f = w;
                    if obs[0] {
                        f = f * e[0].pdf(x[0], v2);
                    }
                    if obs[2] {
                        f = f * e[1].pdf(v2, x[2]);
                    }
                    weight.push(f);
                    a1.push(e[0].h(x[0], v2));
                    a3.push(e[1].h(x[2], v2));
                }
                Ok(Tree1Grid::Three {
                    observed: [obs[0], obs[1], obs[2]],
                    weight,
                    a1,
                    a3,
                })
            }
            _ => {
                let g2 = grid_for(obs[1], x[1]);
                let g3 = grid_for(obs[2], x[2]);
                let n = g2.len() * g3.len();
                let mut w2 = Vec::with_capacity(g2.len());
                let mut a1 = Vec::with_capacity(g2.len());
                for &(v2, w) in &g2 {
                    w2.push(if obs[0] { w * e[0].pdf(x[0], v2) } else { w });
                    a1.push(e[0].h(x[0], v2));
                }
                let mut w3 = Vec::with_capacity(g3.len());
                let mut a4 = Vec::with_capacity(g3.len());
                for &(v3, w) in &g3 {
                    w3.push(if obs[3] { w * e[2].pdf(v3, x[3]) } else { w });
                    a4.push(e[2].h(x[3], v3));
                }
                let mut weight = Vec::with_capacity(n);
                let mut b3 = Vec::with_capacity(n);
                let mut b2 = Vec::with_capacity(n);
                for (i, &(v2, _)) in g2.iter().enumerate() {
                    for (j, &(v3, _)) in g3.iter().enumerate() {
                        let t = e[1].terms(v2, v3);
                        weight.push(w2[i] * w3[j] * t.pdf);
                        b3.push(t.h_v_given_u);
                        b2.push(t.h_u_given_v);
                    }
                }
                Ok(Tree1Grid::Four {
                    observed: obs,
                    n3: g3.len(),
                    weight,
                    a1,
                    a4,
                    b3,
                    b2,
                })
            }
        }
    }

    /// Second stage: combine a tree-1 grid with this model's higher-tree
    /// copulas. The grid must come from a model with the same structure.
    pub fn upper_trees(&self, grid: &Tree1Grid<T>) -> T {
        let e = &self.edges;
        match grid {
            Tree1Grid::Three {
                observed,
                weight,
                a1,
                a3,
            } => {
                let top = &e[2];
                let mut sum = T::zero();
                for k in 0..weight.len() {
                    let (p, q) = (a1[k], a3[k]);
                    let t = match (observed[0], observed[2]) {
                        (false, false) => top.cdf(p, q),
                        (true, false) => top.h(q, p),
                        (false, true) => top.h(p, q),
                        (true, true) => top.pdf(p, q),
                    };
                    sum = sum + weight[k] * t;
                }
                sum
            }
            Tree1Grid::Four {
                observed,
                n3,
                weight,
                a1,
                a4,
                b3,
                b2,
            } => {
                let (e13, e24, e14) = (&e[3], &e[4], &e[5]);
                if let (Some(f13), Some(f24), Some(f14)) =
                    (e13.frank_prepared(), e24.frank_prepared(), e14.frank_prepared())
                {
                    let a12: Vec<T> = a1.iter().map(|&x| f13.a(x)).collect();
                    let a43: Vec<T> = a4.iter().map(|&x| f24.a(x)).collect();
                    let mut sum = T::zero();
                    for (k, &wk) in weight.iter().enumerate() {
                        if wk == T::zero() {
                            continue;
                        }
                        let (i, j) = (k / n3, k % n3);
                        let term = self.frank_node(
                            (&f13, &f24, &f14),
                            *observed,
                            (a12[i], f13.a(b3[k]), a43[j], f24.a(b2[k])),
                        );
                        let t = match term {
                            Some(t) => t,
                            None => self.generic_node(*observed, (a1[i], a4[j], b3[k], b2[k])),
                        };
                        sum = sum + wk * t;
                    }
                    return sum;
                }
                let mut sum = T::zero();
                for (k, &wk) in weight.iter().enumerate() {
                    if wk == T::zero() {
                        continue;
                    }
                    let (i, j) = (k / n3, k % n3);
                    sum = sum + wk * self.generic_node(*observed, (a1[i], a4[j], b3[k], b2[k]));
                }
                sum
            }
        }
    }

    /// Higher-tree factor of one four-dimensional grid node from the
    /// tree-1 values `(h₁|₂, h₄|₃, h₃|₂, h₂|₃)`.
    #[inline]
    fn generic_node(&self, observed: [bool; 4], (h12, h43, h32, h23): (T, T, T, T)) -> T {
        let (e13, e24, e14) = (&self.edges[3], &self.edges[4], &self.edges[5]);
        let w1 = e13.h(h12, h32);
        let w4 = e24.h(h43, h23);
        let mut f = T::one();
        if observed[0] {
            f = f * e13.pdf(h12, h32);
        }
        if observed[3] {
            f = f * e24.pdf(h23, h43);
        }
        let t = match (observed[0], observed[3]) {
            (false, false) => e14.cdf(w1, w4),
            (true, false) => e14.h(w4, w1),
            (false, true) => e14.h(w1, w4),
            (true, true) => e14.pdf(w1, w4),
        };
        f * t
    }

    /// [`generic_node`](Self::generic_node) for all-Frank higher trees,
    /// taking the `A` transforms of the tree-1 values.
    #[inline]
    fn frank_node(
        &self,
        (f13, f24, f14): (&FrankPrepared<T>, &FrankPrepared<T>, &FrankPrepared<T>),
        observed: [bool; 4],
        (a12, a32, a43, a23): (T, T, T, T),
    ) -> Option<T> {
        let w1 = f13.h(a12, a32)?;
        let w4 = f24.h(a43, a23)?;
        let mut f = T::one();
        if observed[0] {
            f = f * f13.pdf(a12, a32)?;
        }
        if observed[3] {
            f = f * f24.pdf(a23, a43)?;
        }
        let (b1, b4) = (f14.a(w1), f14.a(w4));
        let t = match (observed[0], observed[3]) {
            (false, false) => f14.cdf(w1, w4, b1, b4)?,
            (true, false) => f14.h(b4, b1)?,
            (false, true) => f14.h(b1, b4)?,
            (true, true) => f14.pdf(b1, b4)?,
        };
        Some(f * t)
    }

    /// `n` draws by inverse Rosenblatt transform along the path.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<Vec<T>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(n, &mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Vec<T>>> {
        let d = self.dim();
        let e = &self.edges;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let mut w = [T::zero(); 4];
            for wk in w.iter_mut().take(d) {
                let draw: f64 = rng.sample(Open01);
                *wk = T::lit(draw);
            }
            let mut x = [T::zero(); 4];
            x[0] = w[0];
            x[1] = e[0].h_inverse(w[1], x[0])?;
            // C(3|1,2) = h₁₃;₂(h₃|₂(x₃|x₂) | h₁|₂(x₁|x₂))
            let h12 = e[0].h(x[0], x[1]);
            let t = e[d - 1].h_inverse(w[2], h12)?;
            x[2] = e[1].h_inverse(t, x[1])?;
            if d == 4 {
                let h32 = e[1].h(x[2], x[1]);
                let h23 = e[1].h(x[1], x[2]);
                let c1_23 = e[3].h(h12, h32);
                let s = e[5].h_inverse(w[3], c1_23)?;
                let r = e[4].h_inverse(s, h23)?;
                x[3] = e[2].h_inverse(r, x[2])?;
            }
            let mut u = vec![T::zero(); d];
            for (p, &v) in self.order.iter().enumerate() {
                u[v] = x[p];
            }
            out.push(u);
        }
        Ok(out)
    }
}

/// `d(d-1)/2`.
pub fn edge_count(d: usize) -> usize {
    d * (d - 1) / 2
}

/// Free-function form of [`DVineModel::sample`].
pub fn sample_vine<T: Scalar>(m: &DVineModel<T>, n: usize, seed: u64) -> Result<Vec<Vec<T>>> {
    m.sample(n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::Family::*;

    fn ccf() -> DVineModel<f64> {
        DVineModel::from_params(vec![0, 1, 2], &[Clayton, Clayton, Frank], &[3.0, 3.0, 2.92]).unwrap()
    }

    fn mixed4() -> DVineModel<f64> {
        DVineModel::from_params(
            vec![0, 1, 2, 3],
            &[Clayton, Frank, Gumbel, Frank, Frank, Frank],
            &[3.0, 6.3, 2.5, 1.7, 2.8, 3.7],
        )
        .unwrap()
    }

    #[test]
    fn structure_validation() {
        let c = PairCopula::<f64>::independence();
        assert!(DVineModel::new(vec![0, 1], vec![c]).is_err());
        assert!(DVineModel::new(vec![0, 0, 1], vec![c; 3]).is_err());
        assert!(DVineModel::new(vec![0, 1, 2], vec![c; 4]).is_err());
        assert!(DVineModel::new(vec![2, 0, 1, 3], vec![c; 6]).is_ok());
    }

    #[test]
    fn edge_labels_structure_c() {
        let m = DVineModel::<f64>::new(vec![0, 2, 3, 1], vec![PairCopula::independence(); 6]).unwrap();
        let labels: Vec<String> = m.edge_labels().iter().map(|l| l.to_string()).collect();
        assert_eq!(labels, ["13", "34", "24", "14;3", "23;4", "12;34"]);
        assert_eq!(m.edge_labels()[5].tree(), 3);
    }

    #[test]
    fn independence_density_and_conditionals() {
        let m = DVineModel::<f64>::independence(4).unwrap();
        let u = [0.2, 0.7, 0.4, 0.9];
        assert_eq!(m.density(&u).unwrap(), 1.0);
        assert!((m.conditional_cdf(0, &[1, 2], &u).unwrap() - 0.2).abs() < 1e-15);
        assert!((m.conditional_cdf(3, &[0, 1, 2], &u).unwrap() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn three_dim_density_term_by_term() {
        let m = ccf();
        let (u1, u2, u3) = (0.5, 0.5, 0.5);
        let c12 = PairCopula::new(Clayton, 3.0).unwrap();
        let c132 = PairCopula::new(Frank, 2.92).unwrap();
        let a = c12.h(u1, u2);
        let b = c12.h(u3, u2);
        let expected = c12.pdf(u1, u2) * c12.pdf(u2, u3) * c132.pdf(a, b);
        assert!((m.density(&[u1, u2, u3]).unwrap() - expected).abs() < 1e-14);
        assert!((m.ln_density(&[u1, u2, u3]).unwrap() - expected.ln()).abs() < 1e-12);
    }

    #[test]
    fn first_order_conditional_is_edge_h() {
        let m = ccf();
        let u = [0.3, 0.6, 0.2];
        let c12 = PairCopula::new(Clayton, 3.0).unwrap();
        assert_eq!(m.conditional_cdf(0, &[1], &u).unwrap(), c12.h(0.3, 0.6));
        assert!(m.conditional_cdf(0, &[2], &u).is_err());
        assert!(m.conditional_cdf(1, &[0, 2], &u).is_err());
    }

    #[test]
    fn complete_pattern_is_density() {
        for m in [ccf(), mixed4()] {
            let d = m.dim();
            let rule = GaussLegendre::new(21).unwrap();
            let u = &[0.3, 0.55, 0.7, 0.45][..d];
            let pd = m
                .partial_derivative(&CensoringPattern::all_observed(d), u, &rule)
                .unwrap();
            assert!((pd - m.density(u).unwrap()).abs() < 1e-12 * pd);
        }
    }

    #[test]
    fn independence_catalog_collapses_to_products() {
        let m = DVineModel::<f64>::independence(4).unwrap();
        let rule = GaussLegendre::new(21).unwrap();
        let u = [0.3, 0.55, 0.7, 0.45];
        let p = CensoringPattern::from_indicators(&[0, 1, 1, 0]).unwrap();
        assert!((m.partial_derivative(&p, &u, &rule).unwrap() - 0.3 * 0.45).abs() < 1e-14);
        assert!((m.cdf(&u, &rule).unwrap() - 0.3 * 0.55 * 0.7 * 0.45).abs() < 1e-14);
        assert_eq!(m.case_label(&p).unwrap(), "3(d)");
    }

    #[test]
    fn pattern_dimension_mismatch() {
        let rule = GaussLegendre::new(5).unwrap();
        let p = CensoringPattern::all_censored(3);
        assert!(matches!(
            mixed4().partial_derivative(&p, &[0.5; 4], &rule),
            Err(Error::Structure(_))
        ));
        assert!(CensoringPattern::from_indicators(&[0, 2, 1]).is_err());
    }

    #[test]
    fn pattern_display() {
        let p = CensoringPattern::from_indicators(&[1, 0, 0, 1]).unwrap();
        assert_eq!(p.to_string(), "Δ(1,4)");
        assert_eq!(CensoringPattern::all_censored(4).to_string(), "Δ");
        assert_eq!(CensoringPattern::all_observed(4).to_string(), "Δ(1,2,3,4)");
    }

    #[test]
    fn reversal_preserves_density() {
        for m in [ccf(), mixed4()] {
            let r = m.reversed();
            let u = &[0.21, 0.64, 0.35, 0.8][..m.dim()];
            let a = m.density(u).unwrap();
            let b = r.density(u).unwrap();
            assert!((a - b).abs() < 1e-12 * a, "{a} vs {b}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = mixed4();
        assert_eq!(m.sample(50, 9).unwrap(), m.sample(50, 9).unwrap());
        assert_ne!(m.sample(50, 9).unwrap(), m.sample(50, 10).unwrap());
    }

    #[test]
    fn sampler_inverts_rosenblatt() {
        // The Rosenblatt transform of a sample must give back the uniforms.
        let m = mixed4();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = m.sample_with(20, &mut rng).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for u in draws {
            let w: Vec<f64> = (0..4).map(|_| rng.sample(Open01)).collect();
            assert!((u[0] - w[0]).abs() < 1e-12);
            assert!((m.conditional_cdf(1, &[0], &u).unwrap() - w[1]).abs() < 1e-8);
            assert!((m.conditional_cdf(2, &[0, 1], &u).unwrap() - w[2]).abs() < 1e-8);
            assert!((m.conditional_cdf(3, &[0, 1, 2], &u).unwrap() - w[3]).abs() < 1e-8);
        }
    }
}
