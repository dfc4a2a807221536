use streamk_core::executor::random_operands;
use streamk_core::{
    bank_deserialize, bank_serialize, build_schedule, canonical_policies, estimate,
    execute_schedule, pick_winner, reference_gemm, validate_schedule, CostParams, Error,
    FormatError, HardwareModel, Policy, ProblemSize, SieveBank, TileShape,
};

fn size(m: u64, n: u64, k: u64) -> ProblemSize {
    ProblemSize::new(m, n, k).unwrap()
}

#[test]
fn schedule_execute_and_rank() {
    let s = size(300, 170, 250);
    let tile = TileShape::new(64, 32, 16).unwrap();
    let hw = HardwareModel::new(7, 1).unwrap();
    let (a, b) = random_operands(s, 11).unwrap();
    let expected = reference_gemm(&a, &b).unwrap();
    for policy in canonical_policies() {
        let sched = build_schedule(s, tile, hw, policy).unwrap();
        assert!(validate_schedule(&sched).covered_once, "{policy}");
        assert!(
            execute_schedule(&a, &b, &sched, tile, s)
                .unwrap()
                .bit_eq(&expected),
            "{policy}"
        );
        let cost = estimate(&sched, &CostParams::default());
        assert!(cost.makespan > 0.0 && cost.utilization <= 1.0);
    }
    let record = pick_winner(s, tile, hw, &canonical_policies(), &CostParams::default()).unwrap();
    let best = record.cost_of(record.winner).unwrap().makespan;
    assert!(record.costs.iter().all(|(_, c)| c.makespan >= best));
    assert!(record.gain >= 0.0);
}

#[test]
fn sieve_file_round_trip_keeps_answers() {
    let mut bank = SieveBank::canonical();
    let tile = TileShape::new(256, 128, 32).unwrap();
    let mut sizes = Vec::new();
    for m in [1, 64, 1024, 8192] {
        for k in [16, 512, 65536] {
            let s = size(m, 1024, k);
            let r = pick_winner(
                s,
                tile,
                HardwareModel::default(),
                &canonical_policies(),
                &CostParams::default(),
            )
            .unwrap();
            bank.insert(s, r.winner).unwrap();
            sizes.push((s, r.winner));
        }
    }
    let bytes = bank_serialize(&bank);
    let loaded = bank_deserialize(&bytes).unwrap();
    assert_eq!(bank_serialize(&loaded), bytes);
    for (s, winner) in sizes {
        assert_eq!(loaded.query(s), bank.query(s));
        assert!(loaded.query(s).contains(&winner));
    }
}

#[test]
fn corrupted_file_is_rejected() {
    let mut bytes = bank_serialize(&SieveBank::canonical());
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    assert!(matches!(
        bank_deserialize(&bytes),
        Err(FormatError::ChecksumMismatch { .. })
    ));
    assert!(matches!(
        bank_deserialize(&bytes[..10]),
        Err(FormatError::Truncated { .. })
    ));
}

#[test]
fn unknown_policy_insert_fails() {
    let mut bank = SieveBank::new(&[Policy::DataParallel, Policy::AllStreamK], 100, 0.01).unwrap();
    let err = bank.insert(size(8, 8, 8), Policy::hybrid(2)).unwrap_err();
    assert!(matches!(err, Error::UnknownPolicy(_)));
}
