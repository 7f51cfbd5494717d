# Fading traces and Markov channel quantization
