//! PPO on the target-matching environment: the reward is the negative
//! squared distance between the action and a fixed target, so the optimal
//! greedy action is the target itself.

use nashmod::nn::{ActorCritic, EncodedInput};
use nashmod::ppo::{train, PpoConfig, TargetEnv};

fn main() -> nashmod::Result<()> {
    let target = vec![0.5, -0.3, 0.8];
    let config = PpoConfig {
        total_env_steps: 20_000,
        ..PpoConfig::default()
    };
    let mut envs = vec![TargetEnv::new(target.clone(), 1)?; config.num_envs];
    let model = ActorCritic::new(envs[0].network_config(0))?;
    let report = train(model, &mut envs, &config, |m| {
        let mean = m.evaluate(&EncodedInput::Flat(vec![1.0]))?.0.mean;
        let dist = mean.iter().zip(&target).map(|(a, t)| (a - t).abs()).fold(0.0, f64::max);
        println!("greedy action {mean:.3?}  max error {dist:.4}");
        Ok(None)
    })?;
    let (dist, _) = report.final_model.evaluate(&EncodedInput::Flat(vec![1.0]))?;
    println!("target {target:?}");
    println!("final mean {:.4?}  log_std {:.3?}", dist.mean, dist.log_std);
    Ok(())
}
