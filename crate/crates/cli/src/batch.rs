use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use riskmaps::sim::{
    make_gap_scenario, make_no_gap_scenario, two_lane_map, write_risk_fields, write_trace_csv, RiskField, Scenario,
    Summary, World,
};
use riskmaps::stream::{BLUE_MAX_PCT_PER_S, RED_MIN_PCT_PER_S};

use crate::{Failure, PlotFormat};

const MAP_FILE: &str = "two_lane_map.toml";

fn create(path: &Path) -> Result<fs::File, Failure> {
    fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(Failure::runtime)
}

pub fn run(scenario: Scenario, out: &Path) -> Result<(), Failure> {
    let name = scenario.name.clone();
    let mut world = World::new(scenario).map_err(Failure::config)?;
    let records = world.run().map_err(Failure::runtime)?;
    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(Failure::runtime)?;
    write_trace_csv(&records, create(&out.join("trace.csv"))?).map_err(Failure::runtime)?;
    write_risk_fields(&records, create(&out.join("risk_field.txt"))?).map_err(Failure::runtime)?;
    let summary = Summary::from_trace(&name, &records);
    let summary_json = serde_json::to_string_pretty(&summary).map_err(Failure::runtime)?;
    let snapshot_json = serde_json::to_string_pretty(&world.graph().snapshot()).map_err(Failure::runtime)?;
    fs::write(out.join("summary.json"), summary_json)
        .and_then(|_| fs::write(out.join("snapshot.json"), snapshot_json))
        .map_err(Failure::runtime)?;

    println!("scenario {name}: {} cycles", summary.cycles);
    for a in &summary.advice {
        println!(
            "  t={:5.1}s  {:?}/{:?}  v_tar={:.1} m/s",
            a.t, a.speed, a.direction, a.v_tar
        );
    }
    for (id, d) in &summary.min_distance_m {
        println!("  min distance to {id}: {d:.2} m");
    }
    println!("  final ego lane: {}", summary.final_ego_lane);
    println!(
        "  cycle compute: p50 {:.2} ms, p95 {:.2} ms, max {:.2} ms",
        summary.compute_ms_p50, summary.compute_ms_p95, summary.compute_ms_max
    );
    println!("  wrote {}", out.display());
    Ok(())
}

pub fn gen(out: &Path) -> Result<(), Failure> {
    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(Failure::runtime)?;
    let map = two_lane_map().to_toml().map_err(Failure::runtime)?;
    fs::write(out.join(MAP_FILE), map).map_err(Failure::runtime)?;
    for (file, mut sc) in [
        ("gap.toml", make_gap_scenario()),
        ("no_gap.toml", make_no_gap_scenario()),
    ] {
        sc.map = None;
        sc.map_file = Some(PathBuf::from(MAP_FILE));
        fs::write(out.join(file), sc.to_toml().map_err(Failure::runtime)?).map_err(Failure::runtime)?;
        println!("{}", out.join(file).display());
    }
    Ok(())
}

pub fn plot(scenario: Scenario, cycle: usize, format: PlotFormat, out: Option<&Path>) -> Result<(), Failure> {
    let cycles = scenario.cycles();
    if cycle >= cycles {
        return Err(Failure::config(anyhow::anyhow!(
            "cycle {cycle} is past the last cycle {}",
            cycles - 1
        )));
    }
    let mut world = World::new(scenario).map_err(Failure::config)?;
    let mut field = None;
    while world.cycle() <= cycle {
        field = Some(world.step(None).map_err(Failure::runtime)?.risk_field);
    }
    let field = field.expect("at least one cycle ran");
    let text = match format {
        PlotFormat::Text => field.to_text(),
        PlotFormat::Json => serde_json::to_string_pretty(&field).expect("plain data serializes"),
        PlotFormat::Ascii => ascii(&field),
    };
    match out {
        Some(path) => create(path)?.write_all(text.as_bytes()).map_err(Failure::runtime),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// One line per sample, one character per grid time: `.` blue, `+` between
/// the thresholds, `#` red, `*` marks the chosen sample.
fn ascii(field: &RiskField) -> String {
    let mut out = format!(
        "cycle {} t={:.1}s, columns 0..{} s step {} s\n",
        field.cycle, field.t, field.horizon_s, field.ds
    );
    for row in &field.rows {
        let chosen = row.path == field.chosen_path && row.h == field.chosen_h;
        out.push_str(&format!(
            "{}{:<5} h={:2} {:5.1} m/s |",
            if chosen { '*' } else { ' ' },
            row.target_lane,
            row.h,
            row.end_velocity
        ));
        out.extend(row.rate_pct.iter().map(|&r| {
            if r < BLUE_MAX_PCT_PER_S {
                '.'
            } else if r < RED_MIN_PCT_PER_S {
                '+'
            } else {
                '#'
            }
        }));
        out.push_str("|\n");
    }
    out
}
