# Baseline strategies
