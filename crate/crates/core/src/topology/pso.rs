use rand::Rng;
use rand_distr::Uniform;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwarmConfig {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Velocity limit as a fraction of `upper - lower`.
    pub velocity_clamp: f64,
    pub lower: f64,
    pub upper: f64,
    pub seed: u64,
    /// Training epochs per objective evaluation.
    pub inner_epochs: usize,
    /// Early-stopping patience during objective evaluation.
    pub inner_patience: usize,
    /// When set, each step moves one block of this many dimensions,
    /// cycling through the blocks round-robin.
    pub block_size: Option<usize>,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            swarm_size: 12,
            iterations: 40,
            inertia: 0.729,
            cognitive: 1.49445,
            social: 1.49445,
            velocity_clamp: 0.5,
            lower: 0.0,
            upper: 1.0,
            seed: 7,
            inner_epochs: 5,
            inner_patience: 2,
            block_size: None,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.swarm_size < 2 {
            return Err(Error::invalid("swarm_size must be at least 2"));
        }
        if self.iterations == 0 || self.inner_epochs == 0 || self.inner_patience == 0 {
            return Err(Error::invalid("iterations, inner_epochs and inner_patience must be positive"));
        }
        if !(self.lower < self.upper) || !self.lower.is_finite() || !self.upper.is_finite() {
            return Err(Error::invalid("bounds must be finite with lower < upper"));
        }
        if self.block_size == Some(0) {
            return Err(Error::invalid("block_size must be positive"));
        }
        for (name, v) in [
            ("inertia", self.inertia),
            ("cognitive", self.cognitive),
            ("social", self.social),
            ("velocity_clamp", self.velocity_clamp),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and non-negative")));
            }
        }
        Ok(())
    }

    fn vmax(&self) -> f64 {
        self.velocity_clamp * (self.upper - self.lower)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    pub best_position: Vec<f64>,
    pub best_score: f64,
    /// Steps taken so far; selects the active block in cooperative mode.
    pub steps: usize,
}

/// Scores a batch of positions. Lower is better.
pub type BatchObjective<'a> = dyn FnMut(&[Vec<f64>]) -> Result<Vec<f64>> + 'a;

fn score_all(objective: &mut BatchObjective<'_>, positions: &[Vec<f64>]) -> Result<Vec<f64>> {
    let scores = objective(positions)?;
    if scores.len() != positions.len() {
        return Err(Error::invalid("objective returned the wrong number of scores"));
    }
    if let Some(bad) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::invalid(format!("objective returned {bad}")));
    }
    Ok(scores)
}

impl Swarm {
    /// Uniform positions within bounds, zero velocities, one evaluation round.
    pub fn initialize(dim: usize, cfg: &SwarmConfig, rng: &mut impl Rng, objective: &mut BatchObjective<'_>) -> Result<Self> {
        cfg.validate()?;
        if dim == 0 {
            return Err(Error::invalid("search space has zero dimensions"));
        }
        let u = Uniform::new_inclusive(cfg.lower, cfg.upper).expect("validated bounds");
        let positions: Vec<Vec<f64>> = (0..cfg.swarm_size).map(|_| (0..dim).map(|_| rng.sample(u)).collect()).collect();
        let scores = score_all(objective, &positions)?;
        let particles: Vec<Particle> = positions
            .into_iter()
            .zip(&scores)
            .map(|(p, &s)| Particle {
                velocity: vec![0.0; dim],
                best_position: p.clone(),
                position: p,
                best_score: s,
            })
            .collect();
        let lead = first_min(&scores);
        Ok(Self {
            best_position: particles[lead].position.clone(),
            best_score: scores[lead],
            particles,
            steps: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.best_position.len()
    }
}

fn first_min(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s < scores[best] {
            best = i;
        }
    }
    best
}

/// One global-best PSO update followed by a batch evaluation. Bests only
/// change on strict improvement, so the global best score never increases.
pub fn pso_step(swarm: &mut Swarm, cfg: &SwarmConfig, rng: &mut impl Rng, objective: &mut BatchObjective<'_>) -> Result<()> {
    let dim = swarm.dim();
    let active = match cfg.block_size {
        Some(b) if b < dim => {
            let blocks = dim.div_ceil(b);
            let k = swarm.steps % blocks;
            k * b..((k + 1) * b).min(dim)
        }
        _ => 0..dim,
    };
    let vmax = cfg.vmax();
    let gbest = swarm.best_position.clone();
    for p in &mut swarm.particles {
        for d in active.clone() {
            let (r1, r2): (f64, f64) = (rng.random(), rng.random());
            let v = cfg.inertia * p.velocity[d]
                + cfg.cognitive * r1 * (p.best_position[d] - p.position[d])
                + cfg.social * r2 * (gbest[d] - p.position[d]);
            p.velocity[d] = v.clamp(-vmax, vmax);
            p.position[d] = (p.position[d] + p.velocity[d]).clamp(cfg.lower, cfg.upper);
        }
    }
    let positions: Vec<Vec<f64>> = swarm.particles.iter().map(|p| p.position.clone()).collect();
    let scores = score_all(objective, &positions)?;
    for (p, &s) in swarm.particles.iter_mut().zip(&scores) {
        if s < p.best_score {
            p.best_score = s;
            p.best_position = p.position.clone();
        }
    }
    let lead = first_min(&scores);
    if scores[lead] < swarm.best_score {
        swarm.best_score = scores[lead];
        swarm.best_position = positions[lead].clone();
    }
    swarm.steps += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn sphere(xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(xs.iter().map(|x| x.iter().map(|v| v * v).sum()).collect())
    }

    fn sphere_cfg() -> SwarmConfig {
        SwarmConfig { lower: -5.12, upper: 5.12, ..SwarmConfig::default() }
    }

    #[test]
    fn sphere_converges() {
        let cfg = sphere_cfg();
        let mut rng = seed::rng(11);
        let mut swarm = Swarm::initialize(10, &cfg, &mut rng, &mut sphere).unwrap();
        let mut prev = swarm.best_score;
        for _ in 0..200 {
            pso_step(&mut swarm, &cfg, &mut rng, &mut sphere).unwrap();
            assert!(swarm.best_score <= prev);
            prev = swarm.best_score;
            assert!(swarm
                .particles
                .iter()
                .all(|p| p.position.iter().all(|&x| (cfg.lower..=cfg.upper).contains(&x))));
        }
        assert!(swarm.best_score < 1e-3, "{}", swarm.best_score);
    }

    #[test]
    fn converged_swarm_stays_put() {
        let cfg = sphere_cfg();
        let mut rng = seed::rng(1);
        let mut swarm = Swarm::initialize(3, &cfg, &mut rng, &mut sphere).unwrap();
        let g = swarm.best_position.clone();
        for p in &mut swarm.particles {
            p.position = g.clone();
            p.best_position = g.clone();
            p.velocity = vec![0.0; 3];
        }
        pso_step(&mut swarm, &cfg, &mut rng, &mut sphere).unwrap();
        assert!(swarm.particles.iter().all(|p| p.position == g));
    }

    #[test]
    fn cooperative_blocks_touch_one_block() {
        let cfg = SwarmConfig { block_size: Some(2), ..sphere_cfg() };
        let mut rng = seed::rng(2);
        let mut swarm = Swarm::initialize(5, &cfg, &mut rng, &mut sphere).unwrap();
        let before: Vec<Vec<f64>> = swarm.particles.iter().map(|p| p.position.clone()).collect();
        pso_step(&mut swarm, &cfg, &mut rng, &mut sphere).unwrap();
        for (p, b) in swarm.particles.iter().zip(&before) {
            assert_eq!(p.position[2..], b[2..]);
        }
        let mut c = sphere_cfg();
        c.block_size = Some(2);
        for _ in 0..300 {
            pso_step(&mut swarm, &c, &mut rng, &mut sphere).unwrap();
        }
        assert!(swarm.best_score < 1e-2, "{}", swarm.best_score);
    }

    #[test]
    fn config_checks() {
        assert!(SwarmConfig { swarm_size: 1, ..SwarmConfig::default() }.validate().is_err());
        assert!(SwarmConfig { iterations: 0, ..SwarmConfig::default() }.validate().is_err());
        assert!(SwarmConfig { inner_epochs: 0, ..SwarmConfig::default() }.validate().is_err());
        assert!(SwarmConfig::default().validate().is_ok());
    }
}
