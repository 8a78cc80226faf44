# Output Generation Package for Pair Scout
