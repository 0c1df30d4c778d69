#!/usr/bin/env python3
"""
Setup configuration for the familial e-value selector
"""

from setuptools import setup, find_packages
from pathlib import Path

# Read the README file
this_directory = Path(__file__).parent
long_description = (this_directory / "README.md").read_text()

DEV_REQUIREMENTS = ("pytest", "pytest-cov", "black", "flake8")

# Runtime requirements from requirements.txt, dev tools go to extras
requirements = []
with open('requirements.txt') as f:
    for line in f:
        line = line.strip()
        if line and not line.startswith('#'):
            name = line.split('>=')[0].split('==')[0].split('<=')[0]
            if name not in DEV_REQUIREMENTS:
                requirements.append(line)

setup(
    name="familial-evalues",
    version="0.1.0",
    description="Bootstrap e-value SNP selection for family-based association studies under the ACE mixed model",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*"]),
    py_modules=["evalue_selector"],
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering :: Bio-Informatics",
    ],
    python_requires=">=3.8",
    install_requires=requirements,
    extras_require={
        "dev": list(DEV_REQUIREMENTS),
    },
    entry_points={
        "console_scripts": [
            "familial-evalues=evalue_selector:main",
        ],
    },
    include_package_data=True,
    package_data={
        "": ["config/*.yaml"],
    },
)
