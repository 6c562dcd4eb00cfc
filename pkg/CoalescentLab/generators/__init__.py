# Generators package

