//! Minimal end-to-end run: demo trip, lossy channel, tracking percentile.

use mbc::channel::{apply_channel, ChannelConfig};
use mbc::scheduler::{run_mbc_transmitter, ScheduleConfig};
use mbc::synth::{generate, mixed_demo};
use mbc::tracker::{percentile, run_receiver};

fn main() -> mbc::Result<()> {
    let (spec, duration) = mixed_demo();
    let truth = generate(&spec, duration, 42)?;
    let cfg = ScheduleConfig::new(0.2); // 20 cm threshold, 10-sample window
    let log = run_mbc_transmitter(&truth, &cfg)?;
    println!(
        "transmitted {} messages ({} full updates) over {:.1} s",
        log.messages.len(),
        log.full_update_count(),
        truth.duration()
    );
    let delivered = apply_channel(&log, &ChannelConfig { per: 0.4, seed: 1 })?;
    let series = run_receiver(&delivered, &truth);
    println!("P90 tracking error: {:.2} m", percentile(&series.values(), 0.9)?);
    Ok(())
}
