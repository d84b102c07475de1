from setuptools import setup, find_packages

setup(
    name="gp4pc",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*"]),
    install_requires=[
        "python-dotenv==1.0.0",
        "pydantic==2.6.1",
        "numpy>=1.24,<3",
        "scipy>=1.10",
    ],
    entry_points={
        "console_scripts": [
            "gp4pc = gp4pc.cli:main",
        ],
    },
    python_requires=">=3.8",
)
