use trustwork_core::estimation::sessions::{read_session_rows, session_rows_to_csv};
use trustwork_core::model::reference_model;
use trustwork_core::sim::corpus::corpus_rows;
use trustwork_core::sim::{
    replay_mismatches, run_experiment, simulate_corpus, CorpusConfig, ExperimentConfig,
    TrialRecord,
};

#[test]
fn experiment_logs_replay_bit_for_bit() {
    let m = reference_model();
    let cfg = ExperimentConfig {
        replications: 40,
        seed: 9,
        ..ExperimentConfig::default()
    };
    let result = run_experiment(&cfg, &m, &m).unwrap();
    assert_eq!(result.logs.len(), 40 * cfg.policies.len());
    for log in &result.logs {
        assert!(replay_mismatches(&log.records, &m).unwrap().is_empty(), "{}", log.mission_id);
    }
}

#[test]
fn corpus_survives_csv_round_trip_and_replays() {
    let m = reference_model();
    let logs = simulate_corpus(
        &CorpusConfig {
            participants: 12,
            seed: 5,
            ..CorpusConfig::default()
        },
        &m,
    )
    .unwrap();
    let bytes = session_rows_to_csv(&corpus_rows(&logs)).unwrap();
    let rows = read_session_rows(bytes.as_slice()).unwrap();
    let mut k = 0;
    for log in &logs {
        let n = log.records.len();
        let back: Vec<TrialRecord> = rows[k..k + n]
            .iter()
            .map(|r| TrialRecord::from_row(r).unwrap())
            .collect();
        k += n;
        assert!(replay_mismatches(&back, &m).unwrap().is_empty());
        for (a, b) in back.iter().zip(&log.records) {
            assert_eq!(a.rt_seconds.to_bits(), b.rt_seconds.to_bits());
            assert_eq!(a.p_trust_high.to_bits(), b.p_trust_high.to_bits());
        }
    }
    assert_eq!(k, rows.len());
}
