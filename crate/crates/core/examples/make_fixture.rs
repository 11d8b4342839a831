//! Regenerates the checked-in fixture corpus:
//! `cargo run -p toxiclass-core --example make_fixture > data/fixture.csv`

use toxiclass::synth::{generate, write_csv, SynthConfig};

fn main() -> std::io::Result<()> {
    let config = SynthConfig {
        non_toxic: 260,
        toxic: 130,
        other_flagged: 10,
        label_noise: 0.0,
        typo_rate: 0.04,
        seed: 2024,
    };
    write_csv(&generate(&config), std::io::stdout().lock())
}
