use super::{EnvError, EnvKind, Entity, EntityKind, GridWorld};
use crate::grid::{Action, Cell, Grid};
use rand::seq::index::sample;
use rand::Rng;

/// Interior cells that are walls on static maps.
pub const STATIC_WALL_RATIO: f64 = 0.30;
/// Interior fraction occupied by entities on `enemies_only` and `mixed` maps.
pub const ENTITY_RATIO: f64 = 0.20;
const MAX_ATTEMPTS: usize = 1000;

/// Step budget: three times the optimal hop count.
pub fn max_steps_for(optimal_hops: usize) -> u32 {
    (3 * optimal_hops) as u32
}

fn ratio_count(ratio: f64, area: usize) -> usize {
    (ratio * area as f64).round() as usize
}

/// Number of A* chasers: one up to 8x8, one more per doubling of the side, at most 6.
pub fn adversary_count(width: usize, height: usize) -> usize {
    let side = width.max(height);
    let mut n = 1;
    let mut s = 8;
    while s * 2 <= side && n < 6 {
        s *= 2;
        n += 1;
    }
    n
}

fn entity_mix(kind: EnvKind, interior: usize, rng: &mut impl Rng) -> Vec<EntityKind> {
    let repeat = |k: EntityKind, n: usize| std::iter::repeat(k).take(n);
    match kind {
        EnvKind::Static => Vec::new(),
        EnvKind::EnemiesOnly => repeat(
            EntityKind::Noop { eps: 0.5 },
            ratio_count(ENTITY_RATIO, interior),
        )
        .collect(),
        EnvKind::Mixed => {
            let n = ratio_count(ENTITY_RATIO, interior);
            repeat(EntityKind::WallBlock, n / 2)
                .chain(repeat(EntityKind::Noop { eps: 0.2 }, n - n / 2))
                .collect()
        }
        EnvKind::Avalanche => {
            let frac = rng.gen_range(0.20..=0.30);
            repeat(
                EntityKind::Directional {
                    eps: 1.0,
                    dir: Action::South,
                },
                ratio_count(frac, interior),
            )
            .collect()
        }
        EnvKind::Adversarial => Vec::new(),
        EnvKind::MixedAppendix => {
            let chasers = (0.10 * interior as f64).ceil() as usize;
            let rest = ratio_count(0.10, interior);
            repeat(EntityKind::Adversarial, chasers)
                .chain(repeat(EntityKind::WallBlock, rest / 2))
                .chain(repeat(EntityKind::Noop { eps: 0.2 }, rest - rest / 2))
                .collect()
        }
    }
}

/// Samples a world of the given kind. Content is drawn from `rng`; the
/// world's own dynamics are driven by a seed also drawn from `rng`, so the
/// result is a pure function of the generator state.
pub fn generate(
    kind: EnvKind,
    width: usize,
    height: usize,
    rng: &mut impl Rng,
) -> Result<GridWorld, EnvError> {
    if width < 6 || height < 6 {
        return Err(EnvError::TooSmall(width, height));
    }
    let interior: Vec<Cell> = (1..height - 1)
        .flat_map(|y| (1..width - 1).map(move |x| Cell::new(x, y)))
        .collect();
    for _ in 0..MAX_ATTEMPTS {
        let mut walls = Grid::filled(width, height, false);
        for c in walls.cells().collect::<Vec<_>>() {
            if c.x == 0 || c.y == 0 || c.x + 1 == width || c.y + 1 == height {
                walls[c] = true;
            }
        }
        let mut kinds = entity_mix(kind, interior.len(), rng);
        if kind == EnvKind::Adversarial {
            kinds = vec![EntityKind::Adversarial; adversary_count(width, height)];
        }
        let n_walls = if kind == EnvKind::Static {
            ratio_count(STATIC_WALL_RATIO, interior.len())
        } else {
            0
        };
        let needed = n_walls + 2 + kinds.len();
        if needed > interior.len() {
            return Err(EnvError::Unsatisfiable {
                kind,
                attempts: 0,
            });
        }
        // one draw decides walls, agent, goal and entity cells
        let picks = sample(rng, interior.len(), needed).into_vec();
        for &i in &picks[..n_walls] {
            walls[interior[i]] = true;
        }
        let agent = interior[picks[n_walls]];
        let goal = interior[picks[n_walls + 1]];
        let entities = picks[n_walls + 2..]
            .iter()
            .zip(kinds)
            .map(|(&i, k)| Entity::new(interior[i], k))
            .collect();
        let seed = rng.next_u64();
        if let Ok(world) = GridWorld::from_parts(kind, walls, agent, goal, entities, seed) {
            return Ok(world);
        }
    }
    Err(EnvError::Unsatisfiable {
        kind,
        attempts: MAX_ATTEMPTS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::hop_distances;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn same_seed_same_map() {
        let a = generate(EnvKind::Static, 8, 8, &mut rng(42)).unwrap();
        let b = generate(EnvKind::Static, 8, 8, &mut rng(42)).unwrap();
        assert_eq!(a.walls(), b.walls());
        assert_eq!((a.agent(), a.goal(), a.seed()), (b.agent(), b.goal(), b.seed()));
    }

    #[test]
    fn static_wall_count_is_thirty_percent_of_interior() {
        for seed in 0..5 {
            let w = generate(EnvKind::Static, 32, 32, &mut rng(seed)).unwrap();
            let interior_walls = w
                .walls()
                .cells()
                .filter(|c| c.x > 0 && c.y > 0 && c.x < 31 && c.y < 31 && w.walls()[*c])
                .count();
            assert_eq!(interior_walls, (0.30f64 * 900.0).round() as usize);
        }
    }

    #[test]
    fn static_maps_are_solvable_with_a_ring() {
        for seed in 0..50 {
            let w = generate(EnvKind::Static, 10, 12, &mut rng(seed)).unwrap();
            let d = hop_distances(w.walls(), w.agent());
            assert!(d[w.goal()].is_some());
            assert_ne!(w.agent(), w.goal());
            for c in w.walls().cells() {
                if c.x == 0 || c.y == 0 || c.x == 9 || c.y == 11 {
                    assert!(w.walls()[c]);
                }
            }
        }
    }

    #[test]
    fn too_small_is_rejected() {
        assert_eq!(
            generate(EnvKind::Static, 5, 8, &mut rng(0)).unwrap_err(),
            EnvError::TooSmall(5, 8)
        );
    }

    #[test]
    fn dynamic_densities() {
        let w = generate(EnvKind::EnemiesOnly, 12, 12, &mut rng(1)).unwrap();
        assert_eq!(w.entities().len(), 20);
        assert!(w
            .entities()
            .iter()
            .all(|e| e.kind == EntityKind::Noop { eps: 0.5 }));

        let w = generate(EnvKind::Mixed, 12, 12, &mut rng(1)).unwrap();
        let blocks = w
            .entities()
            .iter()
            .filter(|e| e.kind == EntityKind::WallBlock)
            .count();
        assert_eq!((blocks, w.entities().len()), (10, 20));

        for seed in 0..20 {
            let w = generate(EnvKind::Avalanche, 8, 8, &mut rng(seed)).unwrap();
            let n = w.entities().len();
            assert!((7..=11).contains(&n), "{n}");
        }
    }

    #[test]
    fn adversary_count_scales_with_size() {
        assert_eq!(adversary_count(8, 8), 1);
        assert_eq!(adversary_count(12, 12), 1);
        assert_eq!(adversary_count(16, 16), 2);
        assert_eq!(adversary_count(32, 32), 3);
        assert_eq!(adversary_count(64, 64), 4);
        assert_eq!(adversary_count(4096, 4096), 6);
    }

    #[test]
    fn max_steps_rule() {
        assert_eq!(max_steps_for(5), 15);
        assert_eq!(max_steps_for(1), 3);
    }
}
