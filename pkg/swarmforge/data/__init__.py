# Run ledger and artifact files
