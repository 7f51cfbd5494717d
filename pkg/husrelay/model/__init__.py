# Single-slot system model
