"""Services : modèle, calibration, MFPT, mélange, Monte Carlo, ingestion et rapport."""
