# Design Space Package for Pair Scout
