use layer_prune::bridge::wire::{decode_line, encode};
use layer_prune::bridge::{
    BridgeConfig, BridgeError, BridgeEvaluator, Connector, Decoder, EchoMock, Hello, Hyperparameters,
    Message, Session, WireRequest, WireResponse, WireStatus, PROTOCOL_VERSION,
};
use layer_prune::metrics::MetricKind;
use layer_prune::orchestrator::{
    run_search, EvalStatus, Evaluator, OracleEvaluator, OrchestratorError, ResultCache, Scheduler, SearchPlan,
};
use layer_prune::prune::synthetic::AdditiveOracle;
use layer_prune::prune::{Algorithm, OracleError, PruneLedger};
use std::io::{BufRead, BufReader, Write};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

const DEPTH: usize = 12;

fn config() -> BridgeConfig {
    let mut c = BridgeConfig { timeout_secs: 10.0, ..BridgeConfig::default() };
    c.task_metrics.insert("t".into(), MetricKind::Synthetic);
    c
}

/// Starts `worker` on a thread connected to a fresh session over pipes.
fn pipe_session<F>(timeout: Duration, worker: F) -> Result<Session, BridgeError>
where
    F: FnOnce(BufReader<std::io::PipeReader>, std::io::PipeWriter) + Send + 'static,
{
    let (req_r, req_w) = std::io::pipe().unwrap();
    let (resp_r, resp_w) = std::io::pipe().unwrap();
    std::thread::spawn(move || worker(BufReader::new(req_r), resp_w));
    Session::connect(resp_r, req_w, timeout)
}

fn echo_connector(seed: u64, connects: Arc<AtomicUsize>) -> Connector {
    Box::new(move || {
        connects.fetch_add(1, Ordering::SeqCst);
        pipe_session(Duration::from_secs(10), move |r, w| {
            let _ = EchoMock::new(DEPTH, seed).serve(r, w);
        })
    })
}

/// Says hello, then hangs up.
fn dying_worker(mut r: BufReader<std::io::PipeReader>, mut w: std::io::PipeWriter) {
    let mut line = String::new();
    let _ = r.read_line(&mut line);
    let hello = Message::Hello(Hello { protocol: PROTOCOL_VERSION, agent: EchoMock::AGENT.into() });
    let _ = w.write_all(encode(&hello).as_bytes());
}

fn plan(algorithm: Algorithm, n: usize) -> SearchPlan {
    SearchPlan { algorithm, task: "t".into(), depth: DEPTH, n, seed: 0 }
}

fn candidate_scores(l: &PruneLedger) -> Vec<Vec<(usize, f64)>> {
    l.steps.iter().map(|s| s.candidates.iter().map(|c| (c.layer, c.score)).collect()).collect()
}

fn request(kept: Vec<usize>) -> WireRequest {
    WireRequest {
        protocol: PROTOCOL_VERSION,
        id: 0,
        task: "t".into(),
        dataset: "t".into(),
        kept,
        seed: 0,
        hparams: Hyperparameters::default(),
        metric: MetricKind::Synthetic,
    }
}

#[test]
fn glp_over_the_bridge_matches_in_process_search() {
    for seed in 0..3 {
        let bridge = BridgeEvaluator::new(echo_connector(seed, Arc::default()), config()).unwrap();
        let remote = Scheduler::new(bridge, ResultCache::in_memory(), 4).unwrap();
        let local = Scheduler::new(OracleEvaluator::new(AdditiveOracle::random(DEPTH, seed)), ResultCache::in_memory(), 1)
            .unwrap();
        let a = run_search(&remote, &plan(Algorithm::Glp, 6), None).unwrap();
        let b = run_search(&local, &plan(Algorithm::Glp, 6), None).unwrap();
        assert_eq!(a.chain(), b.chain());
        assert_eq!(candidate_scores(&a), candidate_scores(&b));
        assert_eq!(remote.evaluations(), 57);
    }
}

#[test]
fn spawned_mock_worker_answers_an_optimal_search() {
    let cmd = format!("{} mock-worker --depth {DEPTH} --seed 5", env!("CARGO_BIN_EXE_layer-prune"));
    let bridge = BridgeEvaluator::spawn(cmd, config()).unwrap();
    assert_eq!(bridge.worker(), EchoMock::AGENT);
    let remote = Scheduler::new(bridge, ResultCache::in_memory(), 3).unwrap();
    let local = Scheduler::new(OracleEvaluator::new(AdditiveOracle::random(DEPTH, 5)), ResultCache::in_memory(), 1).unwrap();
    let a = run_search(&remote, &plan(Algorithm::Optimal, 2), None).unwrap();
    let b = run_search(&local, &plan(Algorithm::Optimal, 2), None).unwrap();
    assert_eq!(remote.evaluations(), 66);
    assert_eq!(a.optimal_pruned, b.optimal_pruned);
    let scores = |l: &PruneLedger| l.subsets.iter().map(|s| (s.pruned.clone(), s.score)).collect::<Vec<_>>();
    assert_eq!(scores(&a), scores(&b));
}

#[test]
fn timeout_becomes_a_journaled_failure() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("r.journal");
    let cmd = format!("{} mock-worker --depth {DEPTH} --delay-ms 2000", env!("CARGO_BIN_EXE_layer-prune"));
    let cfg = BridgeConfig { timeout_secs: 0.2, ..config() };
    let bridge = BridgeEvaluator::spawn(cmd, cfg).unwrap();
    let s = Scheduler::new(bridge, ResultCache::open(&journal).unwrap(), 1).unwrap();
    let started = Instant::now();
    let out = s.run_step(&[s.request("t", &[0, 1, 2], 0)]);
    assert!(started.elapsed() < Duration::from_secs(2));
    let r = out[0].as_ref().unwrap();
    assert_eq!(r.status, EvalStatus::Failed);
    assert_eq!(r.score, f64::NEG_INFINITY);
    assert!(r.detail.as_deref().unwrap().contains("no response"));
    drop(s);
    let reopened = ResultCache::open(&journal).unwrap();
    assert_eq!(reopened.len(), 1);
}

#[test]
fn responses_are_matched_by_id_when_out_of_order() {
    let session = pipe_session(Duration::from_secs(10), |r, mut w| {
        let mut dec = Decoder::new(r);
        let Some(Ok(Message::Hello(_))) = dec.next_message() else { panic!("no hello") };
        w.write_all(encode(&Message::Hello(Hello { protocol: 1, agent: "rev".into() })).as_bytes()).unwrap();
        let mut held = Vec::new();
        while held.len() < 2 {
            if let Some(Ok(Message::Evaluate(req))) = dec.next_message() {
                held.push(req);
            }
        }
        // answer the later request first
        for req in held.into_iter().rev() {
            let resp = WireResponse {
                id: req.id,
                status: WireStatus::Ok,
                score: Some(req.kept.iter().sum::<usize>() as f64),
                val_loss: None,
                wall_seconds: 0.0,
                worker: "rev".into(),
                message: None,
            };
            w.write_all(encode(&Message::Result(resp)).as_bytes()).unwrap();
        }
    })
    .unwrap();
    std::thread::scope(|s| {
        let a = s.spawn(|| session.call(request(vec![1, 2])).unwrap());
        let b = s.spawn(|| session.call(request(vec![10, 20])).unwrap());
        assert_eq!(a.join().unwrap().score, Some(3.0));
        assert_eq!(b.join().unwrap().score, Some(30.0));
    });
}

#[test]
fn transport_failure_is_retried_once() {
    let connects = Arc::new(AtomicUsize::new(0));
    let counter = Arc::clone(&connects);
    let connector: Connector = Box::new(move || {
        // the first worker dies right after the handshake, later ones work
        if counter.fetch_add(1, Ordering::SeqCst) == 0 {
            pipe_session(Duration::from_secs(10), dying_worker)
        } else {
            pipe_session(Duration::from_secs(10), |r, w| {
                let _ = EchoMock::new(DEPTH, 0).serve(r, w);
            })
        }
    });
    let bridge = BridgeEvaluator::new(connector, config()).unwrap();
    let s = Scheduler::new(bridge, ResultCache::in_memory(), 1).unwrap();
    let r = s.run_step(&[s.request("t", &[0, 1], 0)]).remove(0).unwrap();
    assert_eq!(r.status, EvalStatus::Ok);
    assert_eq!(r.score, AdditiveOracle::random(DEPTH, 0).value(&[0, 1]));
    assert_eq!(connects.load(Ordering::SeqCst), 2);
}

#[test]
fn persistent_transport_failure_leaves_a_resumable_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let ledger = dir.path().join("glp.json");
    let journal = dir.path().join("glp.journal");

    // healthy for the first 15 evaluations, then every worker hangs up
    let served = Arc::new(AtomicUsize::new(0));
    let connector: Connector = Box::new(move || {
        let served = Arc::clone(&served);
        pipe_session(Duration::from_secs(10), move |r, mut w| {
            let mock = EchoMock::new(DEPTH, 1);
            let mut dec = Decoder::new(r);
            dec.next_message();
            w.write_all(encode(&Message::Hello(Hello { protocol: 1, agent: EchoMock::AGENT.into() })).as_bytes()).unwrap();
            while let Some(Ok(Message::Evaluate(req))) = dec.next_message() {
                if served.fetch_add(1, Ordering::SeqCst) >= 15 {
                    return;
                }
                w.write_all(encode(&Message::Result(mock.respond(&req))).as_bytes()).unwrap();
            }
        })
    });
    let bridge = BridgeEvaluator::new(connector, config()).unwrap();
    let s = Scheduler::new(bridge, ResultCache::open(&journal).unwrap(), 1).unwrap();
    let err = run_search(&s, &plan(Algorithm::Glp, 4), Some(&ledger)).unwrap_err();
    assert!(matches!(err, OrchestratorError::Prune(_) | OrchestratorError::Oracle(OracleError::Session(_))), "{err}");
    drop(s);

    let partial = layer_prune::orchestrator::load_ledger(&ledger).unwrap();
    assert_eq!(partial.steps.len(), 1);

    let healthy = BridgeEvaluator::new(echo_connector(1, Arc::default()), config()).unwrap();
    let s = Scheduler::new(healthy, ResultCache::open(&journal).unwrap(), 2).unwrap();
    let done = layer_prune::orchestrator::resume(&s, &ledger).unwrap();
    let fresh_s = Scheduler::new(OracleEvaluator::new(AdditiveOracle::random(DEPTH, 1)), ResultCache::in_memory(), 1).unwrap();
    let fresh = run_search(&fresh_s, &plan(Algorithm::Glp, 4), None).unwrap();
    assert_eq!(done.chain(), fresh.chain());
    assert_eq!(candidate_scores(&done), candidate_scores(&fresh));
    // the 15 results served before the outage come from the journal
    assert_eq!(s.evaluations(), 12 + 11 + 10 + 9 - 15);
}

#[test]
fn garbage_from_the_worker_is_skipped() {
    let session = pipe_session(Duration::from_secs(10), |r, mut w| {
        let mock = EchoMock::new(DEPTH, 0);
        let mut dec = Decoder::new(r);
        dec.next_message();
        w.write_all(encode(&Message::Hello(Hello { protocol: 1, agent: "noisy".into() })).as_bytes()).unwrap();
        while let Some(Ok(Message::Evaluate(req))) = dec.next_message() {
            w.write_all(b"progress: 50%\n{\"type\":\"telemetry\"}\n").unwrap();
            w.write_all(encode(&Message::Result(mock.respond(&req))).as_bytes()).unwrap();
        }
    })
    .unwrap();
    for k in [vec![0], vec![1, 2]] {
        let r = session.call(request(k.clone())).unwrap();
        assert_eq!(r.score, Some(AdditiveOracle::random(DEPTH, 0).value(&k)));
    }
}

#[test]
fn worker_rejects_bad_lines_and_keeps_serving() {
    let hello = encode(&Message::Hello(Hello { protocol: 1, agent: "c".into() }));
    let mut dup = request(vec![0, 1]);
    dup.id = 7;
    let req = encode(&Message::Evaluate(dup));
    let input = format!("{hello}not json\n{req}{req}");
    let mut out = Vec::new();
    let summary = EchoMock::new(DEPTH, 0).serve(input.as_bytes(), &mut out).unwrap();
    assert_eq!((summary.answered, summary.rejected), (1, 2));
    let lines: Vec<Message> = out.split(|&b| b == b'\n').filter(|l| !l.is_empty()).map(|l| decode_line(l, 0).unwrap()).collect();
    assert!(matches!(&lines[0], Message::Hello(h) if h.agent == EchoMock::AGENT));
    let offset = hello.len();
    assert!(matches!(&lines[1], Message::Error(e) if e.id.is_none() && e.message.contains(&format!("byte {offset}"))));
    assert!(matches!(&lines[2], Message::Result(r) if r.id == 7));
    assert!(matches!(&lines[3], Message::Error(e) if e.id == Some(7) && e.message.contains("duplicate")));
}

#[test]
fn version_mismatch_fails_the_handshake() {
    let err = pipe_session(Duration::from_secs(10), |mut r, mut w| {
        let mut line = String::new();
        r.read_line(&mut line).unwrap();
        w.write_all(b"{\"type\":\"hello\",\"protocol\":2,\"agent\":\"future\"}\n").unwrap();
    })
    .err()
    .expect("handshake must fail");
    assert!(err.to_string().contains("protocol version 2"), "{err}");

    let mut out = Vec::new();
    let res = EchoMock::new(DEPTH, 0).serve(&b"{\"type\":\"hello\",\"protocol\":9,\"agent\":\"x\"}\n"[..], &mut out);
    assert!(res.is_err());
    assert!(String::from_utf8(out).unwrap().contains("\"type\":\"error\""));
}

#[test]
fn silent_worker_times_out_the_handshake() {
    let started = Instant::now();
    let err = pipe_session(Duration::from_millis(200), |r, _w| {
        std::thread::sleep(Duration::from_millis(600));
        drop(r);
    })
    .err()
    .unwrap();
    assert!(matches!(err, BridgeError::Handshake(_)));
    assert!(started.elapsed() < Duration::from_millis(550));
}

#[test]
fn golden_transcript_replays_byte_exact() {
    let text = include_str!("fixtures/transcript_v1.jsonl");
    let mut input = String::new();
    let mut expected = String::new();
    for line in text.lines().filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (dir, body) = line.split_at(2);
        match dir {
            "> " => input.push_str(body),
            "< " => expected.push_str(body),
            _ => panic!("bad transcript line {line:?}"),
        }
        if dir == "> " {
            input.push('\n');
        } else {
            expected.push('\n');
        }
    }
    let mut out = Vec::new();
    EchoMock::new(DEPTH, 0).serve(input.as_bytes(), &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), expected);

    // requests without extension fields are in canonical client encoding
    for line in input.lines().filter(|l| !l.contains("priority")) {
        if let Ok(msg @ Message::Evaluate(_)) = decode_line(line.as_bytes(), 0) {
            assert_eq!(encode(&msg), format!("{line}\n"));
        }
    }
}

#[test]
fn bridge_fingerprint_tracks_configuration() {
    let a = BridgeEvaluator::new(echo_connector(0, Arc::default()), config()).unwrap();
    let b = BridgeEvaluator::new(echo_connector(0, Arc::default()), config()).unwrap();
    let mut cfg = config();
    cfg.hparams.lr = 3e-5;
    let c = BridgeEvaluator::new(echo_connector(0, Arc::default()), cfg).unwrap();
    assert_eq!(a.fingerprint(), b.fingerprint());
    assert_ne!(a.fingerprint(), c.fingerprint());
    assert_eq!(a.metric_kind("t").unwrap(), MetricKind::Synthetic);
    assert_eq!(a.metric_kind("cola").unwrap(), MetricKind::MatthewsCorr);
}
