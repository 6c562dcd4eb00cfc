# Analyzer package

