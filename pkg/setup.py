import setuptools
import pathlib

PKG_NAME = "gridfreq"
VERSION = "0.1.0"

CORE_REQUIRES = [
    "pydantic>=2.7.0",
    "python-dotenv>=1.0.1",
    "numpy>=1.24",
    "scipy>=1.10",
    "networkx>=3.0",
    "control>=0.9.4",
    "pandas>=2.0",
]

EXTRAS = {
    "test": ["pytest>=8.3.0", "pytest-cov>=4.1.0", "hypothesis>=6.0.0"],
}

setuptools.setup(
    name=PKG_NAME,
    version=VERSION,
    author="Saikethan",
    description='Distributed secondary frequency control: simulation, optimal dispatch and dissipativity certificates',
    long_description=pathlib.Path('README.md').read_text(encoding='utf-8'),
    long_description_content_type='text/markdown',
    packages=setuptools.find_packages('src'),
    package_dir={'': 'src'},
    package_data={'gridfreq': ['data/*.json']},
    install_requires=CORE_REQUIRES,
    extras_require=EXTRAS,
    entry_points={'console_scripts': ['gridfreq=gridfreq.cli:main']},
    include_package_data=True,
    python_requires='>=3.10',
    license="MIT",
    classifiers=[
        'Intended Audience :: Science/Research',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Programming Language :: Python :: 3.12',
        'Topic :: Scientific/Engineering',
    ],
)
