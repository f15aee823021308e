use crate::env::GridWorld;
use crate::grid::Cell;
use crate::planners::{Planner, ValueMap};
use crate::tensor::TensorError;
use std::path::Path;

/// Grayscale P5 image, one pixel per cell. Values map linearly from
/// `[min, max]` to `0..=255` (a flat map is mid-gray); walls are drawn
/// black and the goal white.
pub fn value_pgm(values: &[f32], world: &GridWorld) -> Vec<u8> {
    let (w, h) = (world.width(), world.height());
    assert_eq!(values.len(), w * h, "value map does not match the world");
    let lo = values.iter().copied().fold(f32::INFINITY, f32::min);
    let hi = values.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    let blocked = world.blocked_mask();
    for (i, &v) in values.iter().enumerate() {
        let c = blocked.cell_at(i);
        let px = if c == world.goal() {
            255
        } else if blocked[c] {
            0
        } else if hi > lo {
            (((v - lo) / (hi - lo)) * 255.0).round() as u8
        } else {
            128
        };
        out.push(px);
    }
    out
}

/// Parses a binary PGM with maxval 255 into `(width, height, pixels)`.
pub fn parse_pgm(bytes: &[u8]) -> Option<(usize, usize, Vec<u8>)> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return None;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).ok()?);
    }
    if fields[0] != "P5" || fields[3] != "255" {
        return None;
    }
    let w: usize = fields[1].parse().ok()?;
    let h: usize = fields[2].parse().ok()?;
    let data = bytes.get(pos + 1..)?;
    (data.len() == w * h).then(|| (w, h, data.to_vec()))
}

/// Text rendering: `#` walls and wall blocks, `G` goal, `A` agent, `e` other
/// entities, and the greedy move everywhere else.
pub fn policy_ascii(planner: &Planner<f32>, map: &ValueMap, world: &GridWorld) -> Result<String, TensorError> {
    let obs = world.observe_grid();
    let blocked = world.blocked_mask();
    let mut out = String::new();
    for y in 0..world.height() {
        for x in 0..world.width() {
            let c = Cell::new(x, y);
            let ch = if c == world.goal() {
                'G'
            } else if c == world.agent() {
                'A'
            } else if blocked[c] {
                '#'
            } else if world.entities().iter().any(|e| e.alive && e.pos == c) {
                'e'
            } else {
                planner.policy_at(map, &obs, c)?.greedy().arrow()
            };
            out.push(ch);
        }
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Writes `<stem>.pgm` and `<stem>.txt` for the planner's view of `world`;
/// returns the value map.
pub fn render_value_map(planner: &Planner<f32>, world: &GridWorld, stem: &Path) -> Result<ValueMap, RenderError> {
    let obs = world.observe_grid();
    let map = planner.value_map(&obs, crate::planners::choose_depth(world.width(), world.height()))?;
    std::fs::write(stem.with_extension("pgm"), value_pgm(&map.v, world))?;
    std::fs::write(stem.with_extension("txt"), policy_ascii(planner, &map, world)?)?;
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvKind, GridWorld};
    use crate::grid::Grid;
    use crate::oracle::hop_distances;
    use crate::planners::{mvprop_rollout, PlannerConfig, Variant};
    use crate::tensor::Tape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn world() -> GridWorld {
        let mut walls = Grid::filled(7, 6, false);
        for c in walls.cells().collect::<Vec<_>>() {
            if c.x == 0 || c.y == 0 || c.x == 6 || c.y == 5 || (c.x == 3 && c.y < 4) {
                walls[c] = true;
            }
        }
        GridWorld::from_parts(EnvKind::Static, walls, Cell::new(1, 1), Cell::new(5, 1), Vec::new(), 0).unwrap()
    }

    #[test]
    fn uniform_values_are_mid_gray() {
        let w = world();
        let img = value_pgm(&vec![0.3; 42], &w);
        let (width, height, px) = parse_pgm(&img).unwrap();
        assert_eq!((width, height), (7, 6));
        for (i, &p) in px.iter().enumerate() {
            let c = Cell::new(i % 7, i / 7);
            let want = if c == w.goal() { 255 } else if w.walls()[c] { 0 } else { 128 };
            assert_eq!(p, want, "{c}");
        }
    }

    #[test]
    fn intensity_falls_along_paths_from_goal() {
        let w = world();
        let obs = w.observe_grid();
        // hand-built fields: reward at the goal, p = 0.9 on free cells, 0 on walls
        let r: Vec<f64> = obs.channel(1).iter().map(|&g| g as f64).collect();
        let p: Vec<f64> = obs.channel(0).iter().map(|&x| if x > 0.0 { 0.0 } else { 0.9 }).collect();
        let mut tape = Tape::new();
        let rv = tape.constant(vec![6, 7], r).unwrap();
        let pv = tape.constant(vec![6, 7], p).unwrap();
        let v = mvprop_rollout(&mut tape, rv, pv, 13).unwrap();
        let values: Vec<f32> = tape.value(v).iter().map(|&x| x as f32).collect();
        let (_, _, px) = parse_pgm(&value_pgm(&values, &w)).unwrap();
        let dist = hop_distances(w.walls(), w.goal());
        for c in w.walls().cells() {
            for n in w.walls().cells() {
                if let (Some(dc), Some(dn)) = (dist[c], dist[n]) {
                    if dn > dc && c != w.goal() && n != w.goal() {
                        assert!(px[w.walls().index(n)] <= px[w.walls().index(c)], "{c} {n}");
                    }
                }
            }
        }
    }

    #[test]
    fn writes_both_files() {
        let dir = tempfile::tempdir().unwrap();
        let planner = Planner::new(PlannerConfig::new(Variant::MvProp), &mut ChaCha8Rng::seed_from_u64(0));
        let stem = dir.path().join("map");
        render_value_map(&planner, &world(), &stem).unwrap();
        let img = std::fs::read(stem.with_extension("pgm")).unwrap();
        assert_eq!(parse_pgm(&img).unwrap().0, 7);
        let txt = std::fs::read_to_string(stem.with_extension("txt")).unwrap();
        assert_eq!(txt.lines().count(), 6);
        assert!(txt.contains('G') && txt.contains('A') && txt.contains('#'));
    }
}
