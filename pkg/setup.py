from setuptools import setup, find_packages

setup(
    name="fitspice",
    version="1.0.0",
    description="FIT electrothermal field models extracted into SPICE-dialect netlists, with field and circuit solvers",
    author="Pascal Legate",
    packages=find_packages(exclude=["tests", "tests.*"]),
    python_requires=">=3.10",
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.10",
        "pandas>=2.0",
        "pyparsing>=3.0",
        "sympy>=1.12",
        "python-dotenv>=1.0",
    ],
    entry_points={
        "console_scripts": ["fitspice=fitspice.cli:main"],
    },
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
)
