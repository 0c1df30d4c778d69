# Familial e-value SNP selector package
