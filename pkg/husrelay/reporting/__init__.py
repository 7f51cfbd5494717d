# Result writers
