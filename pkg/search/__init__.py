# Search Package for Pair Scout
