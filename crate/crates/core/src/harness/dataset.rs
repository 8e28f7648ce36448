//! Game datasets as JSON lines, one game per line.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::Case;
use crate::error::{Error, Result};
use crate::game::{sample_random_game, GameSpec, NormalFormGame};

/// Stream offset separating the shape draw of a general-case game from its
/// payoff draw.
const SHAPE_STREAM: u64 = 0x5eed_5a9e;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub id: String,
    pub num_players: usize,
    pub action_counts: Vec<usize>,
    /// Row-major `[player, a_1, ..., a_K]` tensor.
    pub payoffs: Vec<f64>,
    pub seed: u64,
}

impl GameRecord {
    pub fn from_game(id: String, game: &NormalFormGame, seed: u64) -> Self {
        Self {
            id,
            num_players: game.num_players(),
            action_counts: game.action_counts().to_vec(),
            payoffs: game.payoffs().to_vec(),
            seed,
        }
    }

    pub fn to_game(&self) -> Result<NormalFormGame> {
        if self.num_players != self.action_counts.len() {
            return Err(Error::shape(format!(
                "game {}: num_players {} but {} action counts",
                self.id,
                self.num_players,
                self.action_counts.len()
            )));
        }
        NormalFormGame::new(self.action_counts.clone(), self.payoffs.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<GameRecord>,
    pub test: Vec<GameRecord>,
}

impl Dataset {
    pub fn train_games(&self) -> Result<Vec<NormalFormGame>> {
        self.train.iter().map(GameRecord::to_game).collect()
    }

    pub fn test_games(&self) -> Result<Vec<NormalFormGame>> {
        self.test.iter().map(GameRecord::to_game).collect()
    }
}

/// Shape of the game drawn from `seed`.
pub fn game_spec(case: Case, seed: u64) -> GameSpec {
    match case {
        Case::Simple => GameSpec::new(vec![5, 5]),
        Case::General => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SHAPE_STREAM);
            let players = rng.random_range(2..=3);
            GameSpec::new((0..players).map(|_| rng.random_range(2..=4)).collect())
        }
    }
}

pub fn sample_game(case: Case, seed: u64) -> Result<NormalFormGame> {
    sample_random_game(&game_spec(case, seed), seed)
}

/// Draws distinct per-game seeds from `dataset_seed`; the first `train`
/// go to the training split, the rest to the test split.
pub fn sample_dataset(case: Case, train: usize, test: usize, dataset_seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(dataset_seed);
    let mut seen = HashSet::new();
    let mut seeds = Vec::with_capacity(train + test);
    while seeds.len() < train + test {
        let s = rng.next_u64();
        if seen.insert(s) {
            seeds.push(s);
        }
    }
    let record = |split: &str, i: usize, seed: u64| -> Result<GameRecord> {
        Ok(GameRecord::from_game(format!("{split}-{i:05}"), &sample_game(case, seed)?, seed))
    };
    Ok(Dataset {
        train: seeds[..train].iter().enumerate().map(|(i, &s)| record("train", i, s)).collect::<Result<_>>()?,
        test: seeds[train..].iter().enumerate().map(|(i, &s)| record("test", i, s)).collect::<Result<_>>()?,
    })
}

pub fn write_jsonl(path: &Path, records: &[GameRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::io(path, e.into()))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<GameRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: GameRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: format!("line {}: {e}", n + 1),
        })?;
        record.to_game().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: format!("line {}: {e}", n + 1),
        })?;
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_case_shapes_and_counts() {
        let d = sample_dataset(Case::Simple, 30, 5, 1).unwrap();
        assert_eq!((d.train.len(), d.test.len()), (30, 5));
        assert!(d.train.iter().chain(&d.test).all(|r| r.action_counts == [5, 5] && r.payoffs.len() == 50));
        let train: HashSet<u64> = d.train.iter().map(|r| r.seed).collect();
        assert!(d.test.iter().all(|r| !train.contains(&r.seed)));
    }

    #[test]
    fn general_case_covers_sizes() {
        let d = sample_dataset(Case::General, 300, 0, 2).unwrap();
        let shapes: HashSet<Vec<usize>> = d.train.iter().map(|r| r.action_counts.clone()).collect();
        assert!(shapes.iter().all(|s| (2..=3).contains(&s.len()) && s.iter().all(|a| (2..=4).contains(a))));
        assert!(shapes.len() > 20, "{} shapes", shapes.len());
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let d = sample_dataset(Case::General, 6, 2, 3).unwrap();
        let path = dir.path().join("train.jsonl");
        write_jsonl(&path, &d.train).unwrap();
        assert_eq!(read_jsonl(&path).unwrap(), d.train);
        let again = dir.path().join("again.jsonl");
        write_jsonl(&again, &sample_dataset(Case::General, 6, 2, 3).unwrap().train).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }

    #[test]
    fn bad_lines_report_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"id\":\"x\",\"num_players\":2,\"action_counts\":[2,2],\"payoffs\":[1.0],\"seed\":0}\n").unwrap();
        assert!(matches!(read_jsonl(&path), Err(Error::Parse { .. })));
        assert!(matches!(read_jsonl(&dir.path().join("missing.jsonl")), Err(Error::Io { .. })));
    }
}
