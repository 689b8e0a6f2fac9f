from setuptools import find_packages, setup

setup(
    name="tile_inspect",
    version="0.0.1",
    setup_requires=["pytest-runner"],
    tests_require=["pytest"],
    install_requires=[
        "numpy",
        "scipy",
        "scikit-image",
        "Pillow",
        "pandas>=1.5",
        "tqdm",
        "tensorboardX",
    ],
    entry_points={"console_scripts": ["tile-inspect = tile_inspect.cli:main"]},
    description="Surface defect detection and classification for ceramic tiles",
    license="MIT",
    packages=find_packages(exclude=["tests"]),
)
