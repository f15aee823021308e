//! Plain-text map files.
//!
//! ```text
//! vpmap <width> <height> <kind> <seed>
//! <height rows of width chars: # wall, . free, A agent, G goal,
//!  N noop entity, D directional entity, E adversarial entity, B wall block>
//! entity x=<x> y=<y> kind=<noop|directional|adversarial|wall_block> [eps=<f>] [dir=<N..NW>]
//! ```
//!
//! One `entity` line per live entity, in update order.

use super::{EnvKind, Entity, EntityKind, GridWorld};
use crate::grid::{Action, Cell, Grid};
use std::collections::HashMap;
use std::fmt::Write;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MapFormatError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error(transparent)]
    World(#[from] super::EnvError),
}

fn entity_char(kind: EntityKind) -> char {
    match kind {
        EntityKind::WallBlock => 'B',
        EntityKind::Noop { .. } => 'N',
        EntityKind::Directional { .. } => 'D',
        EntityKind::Adversarial => 'E',
    }
}

pub fn write_map(world: &GridWorld) -> String {
    let mut out = format!(
        "vpmap {} {} {} {}\n",
        world.width(),
        world.height(),
        world.kind(),
        world.seed()
    );
    let live: Vec<&Entity> = world.entities().iter().filter(|e| e.alive).collect();
    for y in 0..world.height() {
        for x in 0..world.width() {
            let c = Cell::new(x, y);
            let ch = if world.walls()[c] {
                '#'
            } else if c == world.agent() {
                'A'
            } else if c == world.goal() {
                'G'
            } else if let Some(e) = live.iter().find(|e| e.pos == c) {
                entity_char(e.kind)
            } else {
                '.'
            };
            out.push(ch);
        }
        out.push('\n');
    }
    for e in live {
        let _ = write!(out, "entity x={} y={}", e.pos.x, e.pos.y);
        let _ = match e.kind {
            EntityKind::WallBlock => write!(out, " kind=wall_block"),
            EntityKind::Noop { eps } => write!(out, " kind=noop eps={eps}"),
            EntityKind::Directional { eps, dir } => {
                write!(out, " kind=directional eps={eps} dir={}", dir.short_name())
            }
            EntityKind::Adversarial => write!(out, " kind=adversarial"),
        };
        out.push('\n');
    }
    out
}

fn syntax(line: usize, msg: impl Into<String>) -> MapFormatError {
    MapFormatError::Syntax {
        line,
        msg: msg.into(),
    }
}

fn parse_entity(line_no: usize, line: &str) -> Result<Entity, MapFormatError> {
    let mut kv = HashMap::new();
    for tok in line.split_whitespace().skip(1) {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| syntax(line_no, format!("expected key=value, got `{tok}`")))?;
        kv.insert(k, v);
    }
    let get = |k: &str| kv.get(k).copied().ok_or_else(|| syntax(line_no, format!("missing `{k}`")));
    let num = |k: &str| -> Result<usize, MapFormatError> {
        get(k)?
            .parse()
            .map_err(|_| syntax(line_no, format!("bad integer for `{k}`")))
    };
    let eps = || -> Result<f64, MapFormatError> {
        let e: f64 = get("eps")?
            .parse()
            .map_err(|_| syntax(line_no, "bad eps"))?;
        if (0.0..=1.0).contains(&e) {
            Ok(e)
        } else {
            Err(syntax(line_no, "eps outside [0, 1]"))
        }
    };
    let kind = match get("kind")? {
        "wall_block" => EntityKind::WallBlock,
        "noop" => EntityKind::Noop { eps: eps()? },
        "directional" => EntityKind::Directional {
            eps: eps()?,
            dir: Action::from_short_name(get("dir")?)
                .ok_or_else(|| syntax(line_no, "bad dir"))?,
        },
        "adversarial" => EntityKind::Adversarial,
        other => return Err(syntax(line_no, format!("unknown entity kind `{other}`"))),
    };
    Ok(Entity::new(Cell::new(num("x")?, num("y")?), kind))
}

pub fn parse_map(text: &str) -> Result<GridWorld, MapFormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| syntax(1, "empty file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "vpmap" {
        return Err(syntax(1, "expected `vpmap <width> <height> <kind> <seed>`"));
    }
    let width: usize = fields[1].parse().map_err(|_| syntax(1, "bad width"))?;
    let height: usize = fields[2].parse().map_err(|_| syntax(1, "bad height"))?;
    let kind: EnvKind = fields[3].parse().map_err(|e: String| syntax(1, e))?;
    let seed: u64 = fields[4].parse().map_err(|_| syntax(1, "bad seed"))?;
    if width == 0 || height == 0 {
        return Err(syntax(1, "empty map"));
    }

    let mut walls = Grid::filled(width, height, false);
    let (mut agent, mut goal) = (None, None);
    let mut marks: HashMap<Cell, char> = HashMap::new();
    for y in 0..height {
        let (no, row) = lines
            .next()
            .ok_or_else(|| syntax(y + 2, "missing map row"))?;
        let chars: Vec<char> = row.chars().collect();
        if chars.len() != width {
            return Err(syntax(no, format!("row has {} cells, expected {width}", chars.len())));
        }
        for (x, ch) in chars.into_iter().enumerate() {
            let c = Cell::new(x, y);
            match ch {
                '#' => walls[c] = true,
                '.' => {}
                'A' if agent.is_none() => agent = Some(c),
                'G' if goal.is_none() => goal = Some(c),
                'N' | 'D' | 'E' | 'B' => {
                    marks.insert(c, ch);
                }
                other => return Err(syntax(no, format!("unexpected `{other}` at {c}"))),
            }
        }
    }
    let mut entities = Vec::new();
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        if !line.starts_with("entity ") {
            return Err(syntax(no, "expected an `entity` line"));
        }
        let e = parse_entity(no, line)?;
        match marks.remove(&e.pos) {
            Some(ch) if ch == entity_char(e.kind) => entities.push(e),
            _ => return Err(syntax(no, format!("entity at {} does not match the grid", e.pos))),
        }
    }
    if let Some(c) = marks.keys().min() {
        return Err(syntax(1, format!("entity at {c} has no entity line")));
    }
    let agent = agent.ok_or_else(|| syntax(1, "no agent `A`"))?;
    let goal = goal.ok_or_else(|| syntax(1, "no goal `G`"))?;
    Ok(GridWorld::from_parts(kind, walls, agent, goal, entities, seed)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::generate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_every_kind() {
        for kind in EnvKind::ALL {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let w = generate(kind, 10, 9, &mut rng).unwrap();
            let text = write_map(&w);
            let back = parse_map(&text).unwrap();
            assert_eq!(write_map(&back), text);
            assert_eq!(back.entities(), w.entities());
            assert_eq!(back.max_steps(), w.max_steps());
        }
    }

    #[test]
    fn parses_a_hand_written_map() {
        let text = "vpmap 6 6 static 1\n######\n#A...#\n#.##.#\n#..#.#\n#...G#\n######\n";
        let w = parse_map(text).unwrap();
        assert_eq!(w.agent(), Cell::new(1, 1));
        assert_eq!(w.goal(), Cell::new(4, 4));
        assert_eq!(w.optimal_hops(), Some(4));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_map("").is_err());
        assert!(parse_map("vpmap 6 6 static\n").is_err());
        let missing_entity = "vpmap 6 6 enemies_only 1\n######\n#AN..#\n#....#\n#....#\n#...G#\n######\n";
        assert!(parse_map(missing_entity).is_err());
        let short_row = "vpmap 6 6 static 1\n######\n#A..#\n";
        assert!(matches!(parse_map(short_row), Err(MapFormatError::Syntax { line: 3, .. })));
    }
}
