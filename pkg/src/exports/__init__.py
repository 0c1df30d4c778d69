# Exports package
