# Accelerator Simulation Package for Pair Scout
