# Embedded SNR solver
