use std::io::Write as _;
use std::net::TcpListener;
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use serde::Serialize;
use serde_json::{json, Value as Json};
use tribokey::adversary::{
    detection_sweep, enumerate_worlds, eve_report, DetectionConfig, EveStrategy, KeyStrategy,
};
use tribokey::exchange::{alice_situations, rule_table, EdgeConvention};
use tribokey::rate::{
    distance_grid, entropy_detection_sweep, rate_sweep, ChannelParams, RateFactors,
    ENTROPY_FORMULA_ID, RATE_FORMULA_ID,
};
use tribokey::session::{
    connect_alice, default_window, direct_key, run_loopback, serve_bob, SessionConfig,
    SessionOutput,
};
use tribokey::{CodeTable, PumpWindow, SourceConfig};

use crate::config::{parse_window, pick, FileConfig};
use crate::{Cli, Command, Format, ProtocolArgs, RoleArg, Status, Table};

pub fn run(cli: &Cli, file: &FileConfig) -> anyhow::Result<Status> {
    let out = Output {
        path: cli.global.out.clone().or_else(|| file.out.clone()),
    };
    let format = cli.global.format.or(file.format);
    let seed = pick(cli.global.seed, file.seed, 0);
    match &cli.command {
        Command::Tables(a) => tables(a, file, format.unwrap_or(Format::Csv), &out),
        Command::Simulate(a) => simulate(a, file, seed, &out),
        Command::Exchange(a) => exchange(a, file, seed, &out),
        Command::EveAnalysis(a) => eve_analysis(a, file, &out),
        Command::DetectSim(a) => detect_sim(a, file, seed, format.unwrap_or(Format::Csv), &out),
        Command::RateSweep(a) => rate(a, file, format.unwrap_or(Format::Csv), &out),
        Command::EntropySweep(a) => entropy(a, file, format.unwrap_or(Format::Csv), &out),
    }
}

struct Output {
    path: Option<std::path::PathBuf>,
}

impl Output {
    fn write(&self, text: &str) -> anyhow::Result<()> {
        match &self.path {
            Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(text.as_bytes())?;
                Ok(stdout.flush()?)
            }
        }
    }

    fn json(&self, params: Json, result: impl Serialize) -> anyhow::Result<()> {
        let doc = json!({ "params": params, "result": result });
        self.write(&(serde_json::to_string_pretty(&doc)? + "\n"))
    }

    /// CSV preceded by a `# ` line echoing the parameters.
    fn csv(&self, params: Json, header: &str, rows: &[String]) -> anyhow::Result<()> {
        let mut s = format!("# {}\n{header}\n", serde_json::to_string(&params)?);
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        self.write(&s)
    }
}

fn convention(flag: &Option<String>, file: &FileConfig) -> anyhow::Result<EdgeConvention> {
    match flag.as_ref().or(file.convention.as_ref()) {
        Some(s) => Ok(s.parse()?),
        None => Ok(EdgeConvention::default()),
    }
}

fn window_or(
    flag: &Option<String>,
    file: &FileConfig,
    default: PumpWindow,
) -> anyhow::Result<PumpWindow> {
    match flag {
        Some(s) => parse_window(s),
        None => Ok(file.window()?.unwrap_or(default)),
    }
}

fn session_config(p: &ProtocolArgs, file: &FileConfig, seed: u64) -> anyhow::Result<SessionConfig> {
    let n = pick(p.n, file.n, 8);
    if n < 2 || !n.is_power_of_two() {
        bail!("N = {n} must be a power of two >= 2");
    }
    let window = window_or(&p.window, file, default_window(n)?)?;
    let mut cfg = SessionConfig::new(n, Some(window), pick(p.rounds, file.rounds, 1000), seed)?;
    cfg.source.check_fraction = pick(
        p.check_fraction,
        file.check_fraction,
        cfg.source.check_fraction,
    );
    cfg.convention = convention(&p.convention, file)?;
    cfg.validate()?;
    Ok(cfg)
}

fn session_params(cfg: &SessionConfig) -> Json {
    json!({
        "seed": cfg.seed(),
        "n": cfg.set_size,
        "window": [cfg.window().lo, cfg.window().hi],
        "code_base": cfg.code_base,
        "rounds": cfg.rounds,
        "check_fraction": cfg.source.check_fraction,
        "convention": cfg.convention,
        "digest": "sha256(u64_be(bit_len) || bits packed msb-first)",
    })
}

fn session_json(o: &SessionOutput, trace: bool) -> Json {
    let mut r = serde_json::to_value(&o.report).expect("report serializes");
    if !trace {
        r.as_object_mut().expect("object").remove("trace");
    }
    r
}

fn tables(
    a: &crate::TablesArgs,
    file: &FileConfig,
    format: Format,
    out: &Output,
) -> anyhow::Result<Status> {
    let conv = convention(&a.convention, file)?;
    match a.table {
        Table::T1 => {
            let n = a.n.unwrap_or(10);
            let table = CodeTable::new(n)?;
            let params = json!({ "command": "tables", "table": "t1", "n": n });
            if format == Format::Json {
                out.json(params, table.entries())?;
            } else {
                let rows: Vec<String> = table
                    .entries()
                    .iter()
                    .map(|e| format!("{},{},{},{}", e.n, e.value, e.bit, e.pos.letter()))
                    .collect();
                out.csv(params, "n,F_n,B_n,class", &rows)?;
            }
        }
        Table::T2 => {
            let from = a.n.unwrap_or(6);
            let rows = alice_situations(from);
            let params = json!({ "command": "tables", "table": "t2", "from": from });
            if format == Format::Json {
                out.json(params, &rows)?;
            } else {
                let slash = |v: &[String]| v.join("/");
                let csv: Vec<String> = rows
                    .iter()
                    .map(|s| {
                        format!(
                            "{},{},F_{}/F_{},{}/{},{},{},{}",
                            if s.adjacent {
                                "adjacent"
                            } else {
                                "discontinuous"
                            },
                            s.alice_classes.replace(',', "/"),
                            s.example.0,
                            s.example.1,
                            s.alice_bits.0,
                            s.alice_bits.1,
                            slash(
                                &s.bob_classes
                                    .iter()
                                    .map(|p| p.letter().to_string())
                                    .collect::<Vec<_>>()
                            ),
                            slash(
                                &s.bob_candidates
                                    .iter()
                                    .map(|n| format!("F_{n}"))
                                    .collect::<Vec<_>>()
                            ),
                            slash(&s.bob_bits.iter().map(u8::to_string).collect::<Vec<_>>()),
                        )
                    })
                    .collect();
                out.csv(params, "alice_type,alice_classes,alice_example,alice_bits,bob_classes,bob_candidates,bob_bits", &csv)?;
            }
        }
        Table::T5 => {
            let window = window_or(&a.window, file, default_window(8)?)?;
            let rows = rule_table(&window);
            let params = json!({ "command": "tables", "table": "t5", "window": [window.lo, window.hi], "convention": conv });
            let reply = |r: &tribokey::exchange::RuleRow| -> String {
                match (r.first_bit_matches, r.bob_position) {
                    (false, _) => "1".into(),
                    (true, tribokey::Position::Center) => "0".into(),
                    (true, tribokey::Position::Edge) => match conv {
                        EdgeConvention::FormulaMod4 => "!(n3 mod 4)".into(),
                        EdgeConvention::ProseLeftOne => "left:1 right:0".into(),
                    },
                }
            };
            if format == Format::Json {
                let items: Vec<Json> = rows
                    .iter()
                    .map(|(r, c)| json!({ "row": r, "bob_reply": reply(r), "cases": c }))
                    .collect();
                out.json(params, items)?;
            } else {
                let csv: Vec<String> = rows
                    .iter()
                    .map(|(r, c)| {
                        let rule = match r.rule {
                            tribokey::exchange::AliceRule::RepeatComplement => "repeat_complement",
                            tribokey::exchange::AliceRule::OwnBits => "own_bits",
                        };
                        format!(
                            "{rule},{},{},{},{c}",
                            r.bob_position.letter(),
                            r.first_bit_matches,
                            reply(r)
                        )
                    })
                    .collect();
                out.csv(
                    params,
                    "alice_rule,bob_class,first_bit_matches_bob,bob_reply,cases",
                    &csv,
                )?;
            }
        }
        Table::T6 => {
            let window = window_or(&a.window, file, default_window(8)?)?;
            let source = SourceConfig::uniform(window, 0);
            let dist = enumerate_worlds(&source, KeyStrategy::V0PumpSum, conv)?;
            let report = eve_report(&dist, 8)?;
            let params = json!({ "command": "tables", "table": "t6", "window": [window.lo, window.hi], "convention": conv });
            if format == Format::Json {
                out.json(params, &report.transcripts)?;
            } else {
                let csv: Vec<String> = report
                    .transcripts
                    .iter()
                    .map(|t| {
                        let keys: Vec<String> = t.keys.iter().map(u64::to_string).collect();
                        format!(
                            "{},{},{},{}",
                            t.bits,
                            keys.join("/"),
                            t.probability,
                            t.best_guess_p
                        )
                    })
                    .collect();
                out.csv(params, "transcript,keys,probability,best_guess_p", &csv)?;
            }
        }
    }
    Ok(Status::Ok)
}

fn simulate(
    a: &crate::SimulateArgs,
    file: &FileConfig,
    seed: u64,
    out: &Output,
) -> anyhow::Result<Status> {
    let cfg = session_config(&a.protocol, file, seed)?;
    let (alice, bob) = run_loopback(&cfg)?;
    let reference = direct_key(&cfg)?;
    let eve = match a.eve.as_ref().or(file.eve.as_ref()) {
        None => None,
        Some(s) => {
            let strategy: EveStrategy = s.parse()?;
            let det = DetectionConfig {
                source: cfg.source.clone(),
                check_rounds: alice.report.check_rounds as u64,
                trials: pick(a.trials, file.trials, 1000),
                alpha: pick(None, file.alpha, 0.001),
            };
            Some(tribokey::adversary::intercept_resend_sim(&det, strategy)?)
        }
    };
    let mut params = session_params(&cfg);
    params["command"] = json!("simulate");
    params["eve"] = json!(a.eve.as_ref().or(file.eve.as_ref()));
    let aborted = alice.aborted() || bob.aborted();
    let result = json!({
        "digest": alice.key.as_ref().map(|k| k.digest.clone()),
        "key_bits": alice.key.as_ref().map(|k| k.bits.len()),
        "digests_match": alice.key.is_some() && alice.key == bob.key,
        "matches_direct": alice.key.as_ref() == Some(&reference),
        "alice": session_json(&alice, a.trace),
        "bob": session_json(&bob, a.trace),
        "eve_detection": eve,
    });
    out.json(params, result)?;
    Ok(if aborted {
        Status::ProtocolAbort
    } else {
        Status::Ok
    })
}

fn exchange(
    a: &crate::ExchangeArgs,
    file: &FileConfig,
    seed: u64,
    out: &Output,
) -> anyhow::Result<Status> {
    let cfg = session_config(&a.protocol, file, seed)?;
    let mut params = session_params(&cfg);
    params["command"] = json!("exchange");
    let outputs: Vec<SessionOutput> = match a.role {
        RoleArg::Bob => {
            let addr = a
                .listen
                .as_deref()
                .context("bob needs --listen host:port")?;
            let listener = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
            params["role"] = json!("bob");
            params["listen"] = json!(listener.local_addr()?.to_string());
            serve_bob(&listener, &cfg, a.sessions)?
        }
        RoleArg::Alice => {
            let addr = a
                .connect
                .as_deref()
                .context("alice needs --connect host:port")?;
            params["role"] = json!("alice");
            params["connect"] = json!(addr);
            let deadline = Instant::now() + Duration::from_millis(a.connect_timeout_ms);
            loop {
                match connect_alice(addr, &cfg) {
                    Ok(o) => break vec![o],
                    Err(_) if Instant::now() < deadline => {
                        std::thread::sleep(Duration::from_millis(50))
                    }
                    Err(e) => return Err(e).with_context(|| format!("connecting to {addr}")),
                }
            }
        }
    };
    let aborted = outputs.iter().any(SessionOutput::aborted);
    let sessions: Vec<Json> = outputs.iter().map(|o| session_json(o, a.trace)).collect();
    out.json(params, json!({ "sessions": sessions }))?;
    Ok(if aborted {
        Status::ProtocolAbort
    } else {
        Status::Ok
    })
}

fn eve_analysis(a: &crate::EveArgs, file: &FileConfig, out: &Output) -> anyhow::Result<Status> {
    let conv = convention(&a.convention, file)?;
    let n = pick(a.n, file.n, 8);
    let window = window_or(&a.window, file, default_window(n.max(2))?)?;
    let variant = a
        .variant
        .clone()
        .or_else(|| file.variant.clone())
        .unwrap_or_else(|| "v0".into());
    let variants: Vec<KeyStrategy> = if variant == "all" {
        KeyStrategy::ALL.to_vec()
    } else {
        vec![variant.parse()?]
    };
    let source = SourceConfig::uniform(window, 0);
    let mut reports = Vec::new();
    for v in variants {
        let dist = enumerate_worlds(&source, v, conv)?;
        let mut r = serde_json::to_value(eve_report(&dist, n)?)?;
        if a.dump_worlds {
            r["worlds"] = serde_json::to_value(&dist.worlds)?;
        }
        reports.push(r);
    }
    let params = json!({
        "command": "eve-analysis",
        "variant": variant,
        "window": [window.lo, window.hi],
        "convention": conv,
        "n": n,
        "priors": "uniform pumps, uniform Bob slot, fair latent coins",
    });
    if reports.len() == 1 {
        out.json(params, reports.pop())?;
    } else {
        out.json(params, reports)?;
    }
    Ok(Status::Ok)
}

fn detect_sim(
    a: &crate::DetectArgs,
    file: &FileConfig,
    seed: u64,
    format: Format,
    out: &Output,
) -> anyhow::Result<Status> {
    let n = pick(a.n, file.n, 8);
    let window = window_or(&a.window, file, default_window(n)?)?;
    let strategy: EveStrategy = a
        .eve
        .as_ref()
        .or(file.eve.as_ref())
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(EveStrategy::ResendMeasuredValue);
    let m_list = a
        .check_rounds
        .clone()
        .or_else(|| file.check_rounds.clone())
        .unwrap_or_else(|| vec![1, 2, 5, 10, 20, 50, 100, 200, 500]);
    let base = DetectionConfig {
        source: SourceConfig::uniform(window, seed),
        check_rounds: 0,
        trials: pick(a.trials, file.trials, 2000),
        alpha: pick(a.alpha, file.alpha, 0.001),
    };
    let reports = detection_sweep(&base, strategy, &m_list)?;
    let params = json!({
        "command": "detect-sim",
        "seed": seed,
        "eve": strategy.to_string(),
        "window": [window.lo, window.hi],
        "trials": base.trials,
        "alpha": base.alpha,
        "check": "projective test onto the state predicted from the revealed pair",
    });
    if format == Format::Json {
        out.json(params, &reports)?;
    } else {
        let opt = |v: Option<f64>| v.map_or("undefined".to_string(), |x| x.to_string());
        let rows: Vec<String> = reports
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{},{},{}",
                    r.check_rounds,
                    opt(r.detection_rate),
                    r.wilson_lower,
                    r.wilson_upper,
                    r.analytic_detection,
                    opt(r.per_event_rate)
                )
            })
            .collect();
        out.csv(
            params,
            "check_rounds,detection_probability,wilson_lower,wilson_upper,analytic_detection,per_event_rate",
            &rows,
        )?;
    }
    Ok(Status::Ok)
}

fn rate(
    a: &crate::RateArgs,
    file: &FileConfig,
    format: Format,
    out: &Output,
) -> anyhow::Result<Status> {
    let d = ChannelParams::default();
    let p = ChannelParams {
        pulse_rate: pick(a.pulse_rate, file.pulse_rate, d.pulse_rate),
        mu: pick(a.mu, file.mu, d.mu),
        fiber_loss: pick(a.fiber_loss, file.fiber_loss, d.fiber_loss),
        detector_efficiency: pick(a.eta, file.eta, d.detector_efficiency),
        dark_count_rate: pick(a.dark_count, file.dark_count, d.dark_count_rate),
        distance: 0.0,
        gate_window: pick(a.gate, file.gate, d.gate_window),
    };
    if let Some(w) = p.weak_pulse_warning() {
        eprintln!("warning: {w}");
    }
    let df = RateFactors::default();
    let factors = RateFactors {
        sift_factor: pick(a.sift, file.sift, df.sift_factor),
        ec_pa_factor: pick(a.ecpa, file.ecpa, df.ec_pa_factor),
    };
    let grid = distance_grid(
        pick(a.max_km, file.max_km, 200.0),
        pick(a.step_km, file.step_km, 10.0),
    )?;
    let configs = a
        .configs
        .clone()
        .or_else(|| file.configs.clone())
        .unwrap_or_else(|| vec![2, 8, 480]);
    let rows = rate_sweep(&p, &grid, &configs, factors)?;
    let params = json!({
        "command": "rate-sweep",
        "channel": p,
        "factors": factors,
        "configs": configs,
        "formula": RATE_FORMULA_ID,
    });
    if format == Format::Json {
        out.json(params, &rows)?;
    } else {
        let csv: Vec<String> = rows
            .iter()
            .map(|r| {
                let p = &r.point;
                format!(
                    "{},{},{},{},{}",
                    p.distance, r.coding_space, p.bits_per_detection, p.sifted_rate, p.secret_rate
                )
            })
            .collect();
        out.csv(
            params,
            "distance_km,config,bits_per_detection,sifted_bps,secret_bps",
            &csv,
        )?;
    }
    Ok(Status::Ok)
}

fn entropy(
    a: &crate::EntropyArgs,
    file: &FileConfig,
    format: Format,
    out: &Output,
) -> anyhow::Result<Status> {
    let list = a
        .n_list
        .clone()
        .or_else(|| file.n_list.clone())
        .unwrap_or_else(|| (1..=9).map(|k| 1u32 << k).collect());
    let rows = entropy_detection_sweep(&list)?;
    let params = json!({
        "command": "entropy-sweep",
        "n_list": list,
        "formula": ENTROPY_FORMULA_ID,
        "baseline": "two-basis N-dimensional protocol, intercept-resend",
    });
    if format == Format::Json {
        out.json(params, &rows)?;
    } else {
        let csv: Vec<String> = rows
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{},{}",
                    r.set_size,
                    r.entropy_base,
                    r.entropy_restricted,
                    r.detection_rate,
                    r.baseline_detection
                )
            })
            .collect();
        out.csv(
            params,
            "N,entropy_base,entropy_restricted,detection_rate,baseline_detection",
            &csv,
        )?;
    }
    Ok(Status::Ok)
}
