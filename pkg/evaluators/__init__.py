# Evaluators Package for Pair Scout
