from setuptools import setup, find_packages

setup(
    name="hq_restore",
    version="0.1.0",
    description="hq-restore - Half-quadratic edge-preserving denoising and deblurring with numerical verification",
    packages=find_packages(exclude=["examples", "examples.*"]),
    python_requires=">=3.10",
    install_requires=[
        "numpy>=1.26.0",
        "scipy>=1.12.0",
        "pandas>=2.2.0",
        "pydantic>=2.6.0",
        "pydantic-settings>=2.1.0",
        "python-dotenv>=1.0.0",
    ],
    entry_points={
        "console_scripts": [
            "hq-restore=src.cli.main:main",
        ],
    },
)
