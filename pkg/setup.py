from setuptools import setup, find_packages

setup(
    name="paoi_relay",
    version="0.2",
    package_dir={"": "src"},
    packages=find_packages(where="src"),
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.8",
    ],
    extras_require={
        "test": ["pytest>=7", "hypothesis>=6"],
    },
    entry_points={
        "console_scripts": [
            "paoi_relay=paoi_relay.main:main",
        ],
    },
)
